#pragma once

#include <optional>
#include <string>

#include "qotl/qwhile.hpp"
#include "qotl/rng.hpp"
#include "qotl/transport.hpp"

namespace qotl {

enum class Status { valid, invalid, unknown };
const char* status_name(Status s);

struct Verdict {
    Status status = Status::unknown;
    bool sampled = false;  // decision rests on sampled parameter families
    std::string reason;
    std::optional<Mat> counterexample;  // input state on H1 (x) H2
    double margin = 0.0;                // re-verified T_Q(outputs) - tr(P rho)
    double falsifier_best = 0.0;        // best semantic margin seen
    double certificate_best = 0.0;      // best dual-violation margin seen
};

// The two sides of a judgment: programs denoted on their own pinned spaces.
struct PairSemantics {
    Denotation den1, den2;
    int dim1 = 1, dim2 = 1;
    bool ast1 = false, ast2 = false;
    bool loops_ok = true;
};

// Empty var orders default to each program's first-occurrence order.
PairSemantics pair_semantics(const ProgramPtr& s1, const ProgramPtr& s2,
                             const Environment& env,
                             const std::vector<std::string>& vars1 = {},
                             const std::vector<std::string>& vars2 = {});

struct WpResult {
    IVPredicate wp;
    bool ast1 = true, ast2 = true;  // precondition of the wp characterization
};

// (E1^dag (x) E2^dag)(Q): valid as a precondition by construction; least
// such (in the pointwise order) when both programs terminate almost surely.
WpResult wp_two_sided(const ProgramPtr& s1, const ProgramPtr& s2, const IVPredicate& q,
                      const Environment& env, const std::vector<std::string>& vars1 = {},
                      const std::vector<std::string>& vars2 = {});

// Writes q = q1 (x) I + I (x) q2 if possible (within 1e-9 in max-norm),
// gauge-fixed so that lambda_min(q1) = 0.
std::optional<std::pair<Mat, Mat>> detect_split(const Mat& q, int d1, int d2);

// Exact decision for split postconditions q1 (x) I + I (x) q2:
//   Valid <=> E1^dag(q1) (x) I + I (x) E2^dag(q2) <= p.
// Requires almost-sure termination on both sides; otherwise Unknown.
Verdict check_split_valid(const IVPredicate& p, const ProgramPtr& s1, const ProgramPtr& s2,
                          const Mat& q1, const Mat& q2, const Environment& env,
                          const std::vector<std::string>& vars1 = {},
                          const std::vector<std::string>& vars2 = {});
// Same decision over precomputed denotations (used by samplers and encodings).
Verdict split_valid_core(const IVPredicate& p, const PairSemantics& sem, const Mat& q1,
                         const Mat& q2);

struct CheckBudget {
    int restarts = 32;       // falsifier multi-starts
    int sweeps = 20;         // local refinement sweeps per restart
    int family_samples = 64; // sampled dual-family instances
    int ascent_steps = 4;    // dual-family refinement steps per instance
    uint64_t seed = 0;
};

// General bounded postconditions: (1) exact split reduction when q is a
// tensor-sum and both programs are channels, (2) falsification by multi-start
// search over pure input states, (3) sampled dual-family certification
// search. Valid only from phase 1; otherwise Invalid or Unknown.
Verdict check_valid_general(const IVPredicate& p, const ProgramPtr& s1, const ProgramPtr& s2,
                            const Mat& q, const Environment& env, const CheckBudget& budget = {},
                            const std::vector<std::string>& vars1 = {},
                            const std::vector<std::string>& vars2 = {});

// Samples (Y1, Y2, n): 0 <= Y1, 0 <= Y2 <= nI, q >= Y1 (x) I - I (x) Y2.
struct DualityInstance {
    Mat y1, y2;
    double n = 0.0;
};
std::vector<DualityInstance> sample_duality_family(const Mat& q, int d1, int d2, int count,
                                                   Rng& rng);

// All outcome probabilities agree within tol.
bool measurement_condition(const std::vector<Mat>& m, const std::vector<Mat>& n,
                           const DensityOperator& rho, const DensityOperator& sigma,
                           double tol = 1e-9);

struct MeasPropertyResult {
    bool holds = false;
    std::string diagnostic;
    ExtReal t_p;          // transport value of the precondition
    ExtReal coupled_best; // min over couplings of sum_i tr(Q_i delta_i)
};

// The measurement property at one state pair: T_P(rho, sigma) = +inf, or a
// family of couplings delta_i of the post-measurement branches exists with
// sum_i tr(Q_i delta_i) <= T_P + tol (decided by one joint SDP).
MeasPropertyResult measurement_property_check(const IVPredicate& p, const std::vector<Mat>& m,
                                              const std::vector<Mat>& n,
                                              const std::vector<IVPredicate>& q,
                                              const DensityOperator& rho,
                                              const DensityOperator& sigma, double tol = 1e-7);

struct DerivationReport {
    bool ok = true;
    bool sampled = false;  // some node relied on sampled side conditions
    int nodes_checked = 0;
    std::vector<std::string> failures;  // "path: message"
};

// Derivation file format:
// {"env": <environment>, "vars1": [names], "vars2": [names],
//  "samples": <int, optional>, "seed": <int, optional>, "root": <node>}
// node: {"rule": <name>, "pre": <ivp>, "post": <ivp>,
//        "prog1": "<dsl>", "prog2": "<dsl>", "premises": [node...],
//        "samples": <int, optional>,
//        "assumption": {"m": name, "vars1": [names],
//                       "n": name, "vars2": [names]}  (seq+ only)}
// Rules: skip, seq, assign-L/R, apply-L/R, if-L/R, while-L/R, csq, duality,
// if, while, seq+.
DerivationReport check_derivation(const nlohmann::json& file);

}  // namespace qotl
