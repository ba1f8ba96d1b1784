#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "qotl/predicates.hpp"

namespace qotl {

// Abstract syntax of the while-language:
//   skip | abort | q := |0> | [q...] *= U(name)
//   | if M(name)[q...] { k -> { S } ... }
//   | while M(name)[q...] == 1 do { S } od
//   | S ; S
struct Program;
using ProgramPtr = std::shared_ptr<const Program>;

struct Program {
    enum class Kind { skip, abort, init, unitary, ifmeas, whilemeas, seq };
    Kind kind = Kind::skip;
    std::vector<std::string> vars;       // init: 1 entry; unitary/meas: as listed
    std::string name;                    // unitary or measurement name
    std::vector<ProgramPtr> children;    // seq: 2; ifmeas: one per branch; while: body
    std::vector<int> outcomes;           // ifmeas: outcome labels, aligned with children
};

ProgramPtr prog_skip();
ProgramPtr prog_abort();
ProgramPtr prog_init(const std::string& var);
ProgramPtr prog_unitary(const std::vector<std::string>& vars, const std::string& name);
ProgramPtr prog_if(const std::vector<std::string>& vars, const std::string& name,
                   std::vector<int> outcomes, std::vector<ProgramPtr> branches);
ProgramPtr prog_while(const std::vector<std::string>& vars, const std::string& name,
                      ProgramPtr body);
ProgramPtr prog_seq(ProgramPtr a, ProgramPtr b);

std::string program_to_string(const ProgramPtr& p);
// Variables in order of first occurrence.
std::vector<std::string> program_vars(const ProgramPtr& p);
// Structural equality (same tree, names, outcome labels).
bool program_equal(const ProgramPtr& a, const ProgramPtr& b);

struct ParseError {
    std::string message;
    int line = 0;
    int col = 0;
};

std::variant<ProgramPtr, ParseError> parse_program(const std::string& src);
// Throwing convenience wrapper (message includes line/column).
ProgramPtr parse_program_or_throw(const std::string& src);

struct Environment {
    std::vector<std::pair<std::string, int>> vars;          // declaration order
    std::map<std::string, Mat> unitaries;                   // user-defined
    std::map<std::string, std::vector<Mat>> measurements;   // user-defined

    int var_dim(const std::string& name) const;
    bool has_var(const std::string& name) const;
    // Resolves built-ins (X, Y, Z, H, CNOT, SWAP) when not user-defined.
    Mat unitary(const std::string& name, int dim) const;
    // Resolves the built-in computational measurement "comp" at any dimension.
    std::vector<Mat> measurement(const std::string& name, int dim) const;
};

// {"vars": {name: dim}, "unitaries": {name: matrix}, "measurements": {name: [matrix...]}}
Environment env_from_json(const nlohmann::json& j);
nlohmann::json env_to_json(const Environment& e);

// Completely positive map as a transfer matrix on column-vectorized operators.
struct Superoperator {
    int in_dim = 0;
    int out_dim = 0;
    Mat transfer;  // (out_dim^2) x (in_dim^2)
};

Superoperator superop_identity(int d);
Superoperator superop_zero(int d);
Superoperator superop_from_kraus(const std::vector<Mat>& kraus);
Mat superop_apply(const Superoperator& e, const Mat& x);
// second o first
Superoperator superop_compose(const Superoperator& second, const Superoperator& first);
Superoperator superop_add(const Superoperator& a, const Superoperator& b);
// Heisenberg dual: tr(a E(b)) = tr(E^dag(a) b).
Superoperator superop_dual(const Superoperator& e);
Mat superop_dual_apply(const Superoperator& e, const Mat& a);
// Tensor product acting on H_a (x) H_b with standard index interleaving.
Superoperator superop_tensor(const Superoperator& a, const Superoperator& b);

// Choi matrix sum_ij |i><j| (x) E(|i><j|); PSD iff E completely positive.
Mat choi_matrix(const Superoperator& e);
Superoperator superop_from_choi(const Mat& choi, int in_dim, int out_dim);
std::vector<Mat> kraus_from_choi(const Mat& choi, int in_dim, int out_dim,
                                 double cutoff = 1e-10);

bool is_cp(const Superoperator& e, double tol = 1e-8);
bool is_trace_nonincreasing(const Superoperator& e, double tol = 1e-8);
// Almost-sure termination: E^dag(I) = I within tol.
bool is_ast(const Superoperator& e, double tol = 1e-8);

// E^dag lifted to infinite-valued predicates:
// E^dag(A) = Pi^perp E^dag(P_A) Pi^perp + inf * supp(E^dag(Pi_X)).
IVPredicate dual_apply_ivp(const Superoperator& e, const IVPredicate& a);

struct DenoteOptions {
    double fix_tol = 1e-10;  // max-norm tolerance on loop fixpoint iteration
    int loop_max_iter = 10000;
    int dim_cap = 256;
};

struct Denotation {
    Superoperator op;
    std::vector<std::string> var_order;  // first-occurrence order
    int dim = 1;
    bool loops_converged = true;
    double loop_residual = 0.0;
    int loop_iterations = 0;  // max over all loops
};

// Errors (unknown names, arity mismatches, dimension cap, invalid isometries)
// throw std::invalid_argument. Loop non-convergence is reported through the
// returned status, with the last iterate kept in `op`.
Denotation denote(const ProgramPtr& p, const Environment& env, const DenoteOptions& opts = {});

// Denote over an explicitly pinned variable order (programs may mention a
// subset; extra variables contribute identity factors).
Denotation denote_with_vars(const ProgramPtr& p, const Environment& env,
                            const std::vector<std::string>& var_order,
                            const DenoteOptions& opts = {});

// Embeds an operator acting on the listed variables (in listed order) into
// the tensor space spanned by var_order, identity on the rest.
Mat embed_operator(const Mat& op, const std::vector<std::string>& listed,
                   const Environment& env, const std::vector<std::string>& var_order);

}  // namespace qotl
