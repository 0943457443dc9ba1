#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "kamtree/modes.hpp"

namespace kamtree {

namespace detail {

inline std::string_view trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_real(std::string_view s, int line) {
    std::string t(trim(s));
    std::size_t used = 0;
    double x = 0;
    try {
        x = std::stod(t, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (t.empty() || used != t.size())
        throw ParseError("line " + std::to_string(line) + ": bad number '" + t + "'");
    return x;
}

inline int parse_int(std::string_view s, int line) {
    std::string t(trim(s));
    std::size_t used = 0;
    int x = 0;
    try {
        x = std::stoi(t, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (t.empty() || used != t.size())
        throw ParseError("line " + std::to_string(line) + ": bad integer '" + t + "'");
    return x;
}

inline std::pair<std::string_view, std::string_view> split_arrow(std::string_view body, int line) {
    for (std::string_view arrow : {std::string_view("->"), std::string_view("→")}) {
        if (auto p = body.find(arrow); p != std::string_view::npos)
            return {trim(body.substr(0, p)), trim(body.substr(p + arrow.size()))};
    }
    throw ParseError("line " + std::to_string(line) + ": missing '->'");
}

}  // namespace detail

// Reads the text potential format:
//   cos: j1 [j2 ...] -> amplitude      amplitude * cos(theta_j1 + theta_j2 + ...)
//   term: j1:n1,j2:n2 -> re,im          raw coefficient f_nu, mirror f_{-nu} = conj added
// '#' starts a comment line.  The result is Hermitian by construction.
inline ScalarSeries parse_potential(std::string_view text) {
    std::map<Mode, cplx> declared;
    auto declare = [&](const Mode& nu, cplx c, int line) {
        auto [it, fresh] = declared.emplace(nu, c);
        if (!fresh && it->second != c)
            throw ParseError("line " + std::to_string(line) + ": conflicting duplicate for mode " + nu.str());
    };

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        auto line = detail::trim(raw);
        if (line.empty() || line.front() == '#') continue;

        auto colon = line.find(':');
        if (colon == std::string_view::npos)
            throw ParseError("line " + std::to_string(line_no) + ": expected 'cos:' or 'term:'");
        auto head = detail::trim(line.substr(0, colon));
        auto [lhs, rhs] = detail::split_arrow(line.substr(colon + 1), line_no);

        if (head == "cos") {
            std::vector<Mode::Entry> entries;
            std::istringstream is{std::string(lhs)};
            std::string tok;
            while (is >> tok) entries.push_back({detail::parse_int(tok, line_no), 1});
            Mode nu = Mode::from_entries(std::move(entries));
            double a = detail::parse_real(rhs, line_no);
            if (nu.is_zero()) {
                declare(nu, a, line_no);
            } else {
                declare(nu, a / 2, line_no);
                declare(-nu, a / 2, line_no);
            }
        } else if (head == "term") {
            std::vector<Mode::Entry> entries;
            std::string_view rest = lhs;
            while (!rest.empty()) {
                auto comma = rest.find(',');
                auto item = detail::trim(rest.substr(0, comma));
                rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
                auto c = item.find(':');
                if (c == std::string_view::npos)
                    throw ParseError("line " + std::to_string(line_no) + ": term entries are 'j:n'");
                entries.push_back({detail::parse_int(item.substr(0, c), line_no),
                                   detail::parse_int(item.substr(c + 1), line_no)});
            }
            Mode nu = Mode::from_entries(std::move(entries));
            auto comma = rhs.find(',');
            if (comma == std::string_view::npos)
                throw ParseError("line " + std::to_string(line_no) + ": coefficient must be 're,im'");
            cplx c{detail::parse_real(rhs.substr(0, comma), line_no),
                   detail::parse_real(rhs.substr(comma + 1), line_no)};
            if (nu.is_zero() && c.imag() != 0)
                throw ParseError("line " + std::to_string(line_no) + ": zero mode must be real");
            declare(nu, c, line_no);
            if (!nu.is_zero()) declare(-nu, std::conj(c), line_no);
        } else {
            throw ParseError("line " + std::to_string(line_no) + ": unknown record '" + std::string(head) + "'");
        }
    }

    ScalarSeries f;
    for (const auto& [nu, c] : declared)
        if (c != cplx{}) f.set(nu, c);
    return f;
}

inline ScalarSeries load_potential(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open potential file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_potential(ss.str());
}

}  // namespace kamtree
