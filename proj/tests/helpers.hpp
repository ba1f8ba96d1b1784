#pragma once

#include <string>
#include <vector>

#include "qotl/qwhile.hpp"
#include "qotl/rng.hpp"

namespace qotl::testing {

inline Environment qubit_env(int n) {
    Environment env;
    for (int i = 0; i < n; ++i) env.vars.emplace_back("q" + std::to_string(i), 2);
    return env;
}

// Random program over the given qubit variables, depth-bounded, using only
// built-in gates and the computational measurement.
inline ProgramPtr random_program(Rng& rng, const std::vector<std::string>& vars, int depth) {
    const int max_kind = depth > 0 ? 6 : 3;
    switch (rng.uniform_int(0, max_kind)) {
        case 0:
            return prog_skip();
        case 1:
            return prog_init(vars[static_cast<size_t>(rng.uniform_int(0, int(vars.size()) - 1))]);
        case 2: {
            static const char* gates[] = {"X", "Y", "Z", "H"};
            std::string v = vars[static_cast<size_t>(rng.uniform_int(0, int(vars.size()) - 1))];
            return prog_unitary({v}, gates[rng.uniform_int(0, 3)]);
        }
        case 3: {
            if (vars.size() < 2) return prog_skip();
            int a = rng.uniform_int(0, int(vars.size()) - 1);
            int b = rng.uniform_int(0, int(vars.size()) - 2);
            if (b >= a) ++b;
            return prog_unitary({vars[size_t(a)], vars[size_t(b)]}, "CNOT");
        }
        case 4:
            return prog_seq(random_program(rng, vars, depth - 1),
                            random_program(rng, vars, depth - 1));
        case 5: {
            std::string v = vars[static_cast<size_t>(rng.uniform_int(0, int(vars.size()) - 1))];
            return prog_if({v}, "comp", {0, 1},
                           {random_program(rng, vars, depth - 1),
                            random_program(rng, vars, depth - 1)});
        }
        default: {
            // loop whose body flips the guard qubit: terminates in one pass
            std::string v = vars[static_cast<size_t>(rng.uniform_int(0, int(vars.size()) - 1))];
            ProgramPtr body = prog_seq(random_program(rng, vars, depth - 1), prog_init(v));
            return prog_while({v}, "comp", body);
        }
    }
}

}  // namespace qotl::testing
