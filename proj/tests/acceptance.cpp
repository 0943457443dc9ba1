// One PASS/FAIL line per acceptance criterion; nonzero exit if any fails.
#include <iostream>

#include "kamtree/acceptance.hpp"

int main() {
    int failed = 0;
    kamtree::run_acceptance({}, [&](const kamtree::CriterionResult& r) {
        std::cout << kamtree::format_result(r) << std::endl;
        failed += !r.pass;
    });
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
    return failed ? 1 : 0;
}
