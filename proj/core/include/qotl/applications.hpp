#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qotl/logic.hpp"

namespace qotl {

// ---------------------------------------------------------------------------
// Trace distance
// ---------------------------------------------------------------------------

// TD(rho, sigma) = (1/2) * sum |eig(rho - sigma)|.
double trace_distance(const DensityOperator& rho, const DensityOperator& sigma);

// Variational form max over 0 <= P <= I of tr(P (rho - sigma)); equals the
// eigenvalue form on trace-matched pairs.
double trace_distance_variational(const DensityOperator& rho, const DensityOperator& sigma);

// Checks TD(E1(rho1), E2(rho2)) <= tr(phi1 rho1) + tr(phi2 rho2) over all
// pairs coupled inside the subspace x, by falsification over pure coupling
// states in x together with sampled instances of the equivalent judgment
//   {x | (I + phi1 (x) I + I (x) phi2)} s1 ~ s2 {P (x) I + I (x) (I - P)}.
// Both programs must be almost surely terminating on the same dimension.
Verdict td_encoding_check(const ProgramPtr& s1, const ProgramPtr& s2, const Subspace& x,
                          const HermitianOperator& phi1, const HermitianOperator& phi2,
                          const Environment& env, const CheckBudget& budget = {},
                          const std::vector<std::string>& vars1 = {},
                          const std::vector<std::string>& vars2 = {});

// ---------------------------------------------------------------------------
// Diamond distance
// ---------------------------------------------------------------------------

// ||e1 - e2||_diamond by the standard Choi-based semidefinite program
//   max { 2 tr(W J) - tr((sigma (x) I) J) : 0 <= W <= sigma (x) I, tr sigma = 1 }.
// Throws on solver failure.
double diamond_distance(const Superoperator& e1, const Superoperator& e2,
                        const SdpOptions& opts = {});

// Smallest bound c accepted by the judgment route: the supremum, over sampled
// ancilla-extended inputs, of the output trace distance. Converges to
// diamond/2 from below as the budget grows.
double diamond_encoding_bound(const ProgramPtr& s1, const ProgramPtr& s2, const Environment& env,
                              const CheckBudget& budget = {},
                              const std::vector<std::string>& vars1 = {},
                              const std::vector<std::string>& vars2 = {});

// ---------------------------------------------------------------------------
// Program equivalence
// ---------------------------------------------------------------------------

struct EquivResult {
    bool equal = false;
    double choi_gap = 0.0;             // max-abs difference of the Choi matrices
    std::optional<Mat> witness_state;  // input on which the outputs differ
    double witness_ts = 0.0;           // stabilized transport value at the witness
    double mono_worst = 0.0;           // worst T_s(outputs) - T_s(inputs) over samples
    int family_samples = 0;            // sampled judgment-family instances checked
    int family_failures = 0;           // instances whose exact split check failed
};

// Primary decision by Choi equality within 1e-8; when equal, cross-certifies
// by stabilized-transport monotonicity sampling and sampled instances of the
// bounded equivalence judgment family.
EquivResult program_equiv(const ProgramPtr& s1, const ProgramPtr& s2, const Environment& env,
                          const CheckBudget& budget = {},
                          const std::vector<std::string>& vars1 = {},
                          const std::vector<std::string>& vars2 = {});

// ---------------------------------------------------------------------------
// Wasserstein Lipschitz continuity
// ---------------------------------------------------------------------------

// Falsification of { lambda^2 P_sym_perp } s1 ~ s2 { P_sym_perp }: verdicts
// are Invalid (with a joint input witness) or Unknown at budget; the
// postcondition is not a tensor sum, so no exact Valid is available.
Verdict wasserstein_lipschitz_check(const ProgramPtr& s1, const ProgramPtr& s2, double lambda,
                                    const Environment& env, const CheckBudget& budget = {},
                                    const std::vector<std::string>& vars1 = {},
                                    const std::vector<std::string>& vars2 = {});

// ---------------------------------------------------------------------------
// Non-interference
// ---------------------------------------------------------------------------

struct QuantumSystemSpec {
    Environment env;
    std::vector<std::string> vars;  // state space: tensor product in this order
    std::vector<std::string> agents;
    std::vector<std::string> commands;
    // (agent, command) -> almost surely terminating program over vars
    std::map<std::pair<std::string, std::string>, ProgramPtr> do_map;
    // agent -> allowable POVMs, each a list of PSD elements summing to I
    std::map<std::string, std::vector<std::vector<Mat>>> measure_map;
};

// Parses {"env":..., "vars":[...], "agents":[...], "commands":[...],
//         "do": {"agent:cmd": "<program>"}, "measure": {"agent": [[m,...],...]}}
// and validates that every do-program is a channel and every POVM resolves I.
QuantumSystemSpec qsys_from_json(const nlohmann::json& j);

struct InterferenceWitness {
    std::vector<std::pair<std::string, std::string>> alpha;  // action sequence
    std::string agent;                                        // observer in g2
    int povm_index = 0;
    double distance = 0.0;  // total variation between outcome distributions
};

struct NonInterferenceResult {
    bool interference_free = false;
    std::optional<InterferenceWitness> witness;
    std::uint64_t sequences_checked = 0;
};

// Exhaustively enumerates action sequences up to max_len from |0><0| and
// compares each observer's outcome distributions between the original and the
// purged run (actions of g1-agents with commands in d removed). The POVM
// maximization is exact: total variation over finite outcome sets.
// Throws when the enumeration would exceed 10^6 sequences.
NonInterferenceResult non_interference_check(const QuantumSystemSpec& spec,
                                             const std::vector<std::string>& g1,
                                             const std::vector<std::string>& g2,
                                             const std::vector<std::string>& d, int max_len);

// ---------------------------------------------------------------------------
// Differential privacy
// ---------------------------------------------------------------------------

// Projector onto the subspace of the doubled n-qubit space whose states have
// symmetric support on every qubit pair except the i-th (0-based); marginals
// of states supported there agree after tracing out qubit i on both sides.
Mat dp_sym_projector(int n, int i);

// (eps, delta) differential privacy of the channel of s on n qubits.
// Neighboring pairs are the two marginals of pure states supported in
// dp_sym_projector(n, i); the inner maximization over measurements and
// outcome sets is exact: tr[(E(rho) - e^eps E(sigma))_+] <= delta.
// Invalid carries the joint witness state; otherwise Unknown at budget with
// the worst margin observed. Requires an almost surely terminating program
// on at most 3 qubits.
Verdict dp_check(const ProgramPtr& s, const Environment& env,
                 const std::vector<std::string>& qubits, double eps, double delta,
                 const CheckBudget& budget = {});

}  // namespace qotl
