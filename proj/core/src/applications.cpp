#include "qotl/applications.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "qotl/json_io.hpp"

namespace qotl {

namespace {

Mat normalized(const Mat& v) {
    double n2 = 0.0;
    for (const auto& z : v.a) n2 += std::norm(z);
    const double n = std::sqrt(n2);
    if (n == 0.0) return v;
    return (1.0 / n) * v;
}

Mat cgauss_vec(int d, Rng& r) {
    Mat v(d, 1);
    for (int i = 0; i < d; ++i) v(i, 0) = r.cgauss();
    return v;
}

// Multi-start hill climb over pure states psi = normalized(proj * gaussian),
// maximizing f(psi). Stops a restart early once f exceeds stop_at.
double climb_pure(const Mat& proj, int dim, const CheckBudget& budget, Rng& root,
                  const std::function<double(const Mat&)>& f, double stop_at, Mat* arg) {
    double best = -1e300;
    for (int rs = 0; rs < budget.restarts; ++rs) {
        Rng r = root.fork(rs + 1);
        Mat psi = proj * cgauss_vec(dim, r);
        if (max_abs(psi) < 1e-12) continue;
        psi = normalized(psi);
        double cur = f(psi);
        double step = 0.5;
        for (int sw = 0; sw < budget.sweeps && cur <= stop_at; ++sw) {
            Mat dir = proj * cgauss_vec(dim, r);
            bool improved = false;
            for (double sgn : {1.0, -1.0}) {
                Mat cand = normalized(psi + (sgn * step) * dir);
                const double cv = f(cand);
                if (cv > cur + 1e-14) {
                    psi = cand;
                    cur = cv;
                    improved = true;
                    break;
                }
            }
            if (!improved) step *= 0.7;
        }
        if (cur > best) {
            best = cur;
            if (arg) *arg = psi;
        }
        if (best > stop_at) break;
    }
    return best;
}

}  // namespace

double trace_distance(const DensityOperator& rho, const DensityOperator& sigma) {
    if (rho.dim != sigma.dim) throw std::invalid_argument("trace_distance: dimension mismatch");
    return 0.5 * trace_norm(herm_part(rho.m - sigma.m));
}

double trace_distance_variational(const DensityOperator& rho, const DensityOperator& sigma) {
    if (rho.dim != sigma.dim) throw std::invalid_argument("trace_distance: dimension mismatch");
    return positive_part_trace(herm_part(rho.m - sigma.m));
}

Verdict td_encoding_check(const ProgramPtr& s1, const ProgramPtr& s2, const Subspace& x,
                          const HermitianOperator& phi1, const HermitianOperator& phi2,
                          const Environment& env, const CheckBudget& budget,
                          const std::vector<std::string>& vars1,
                          const std::vector<std::string>& vars2) {
    PairSemantics sem = pair_semantics(s1, s2, env, vars1, vars2);
    const int d = sem.dim1;
    if (sem.dim2 != d) throw std::invalid_argument("td_encoding_check: program dimensions differ");
    if (!sem.ast1 || !sem.ast2 || !sem.loops_ok)
        throw std::invalid_argument(
            "td_encoding_check: programs must be almost surely terminating");
    if (x.dim != d * d || phi1.dim != d || phi2.dim != d)
        throw std::invalid_argument("td_encoding_check: operand dimensions do not fit the programs");

    const Mat id = Mat::identity(d);
    auto outputs = [&](const Mat& rho, Mat* o1, Mat* o2, double* bound) {
        Mat r1 = herm_part(partial_trace(rho, 1, d, d));
        Mat r2 = herm_part(partial_trace(rho, 2, d, d));
        *o1 = herm_part(superop_apply(sem.den1.op, r1));
        *o2 = herm_part(superop_apply(sem.den2.op, r2));
        *bound = trace_prod(phi1.m, r1).real() + trace_prod(phi2.m, r2).real();
    };
    auto margin_of = [&](const Mat& rho) {
        Mat o1, o2;
        double bound;
        outputs(rho, &o1, &o2, &bound);
        return 0.5 * trace_norm(o1 - o2) - bound;
    };

    Verdict v;
    Rng root(budget.seed);

    // Direct route: pure coupling states inside x (convexity of TD makes pure
    // couplings the worst case).
    Mat best_psi;
    const double best = climb_pure(
        x.proj, d * d, budget, root, [&](const Mat& psi) { return margin_of(psi * dagger(psi)); },
        1e-6, &best_psi);
    v.falsifier_best = best;
    if (best > 1e-6) {
        v.status = Status::invalid;
        v.counterexample = best_psi * dagger(best_psi);
        v.margin = best;
        v.reason = "coupled input pair violates the trace-distance bound";
        return v;
    }

    // Judgment route: sampled postcondition family P (x) I + I (x) (I - P)
    // under the guarded precondition; each instance is checked exactly.
    IVPredicate guard = ivp_guard(
        x, ivp_from_matrix(Mat::identity(d * d) + kron(phi1.m, id) + kron(id, phi2.m)));
    Rng frng = root.fork(0xBEEF);
    int boundary_failures = 0;
    for (int k = 0; k < budget.family_samples; ++k) {
        Mat p;
        if (k == 0 && best_psi.rows == d * d) {
            // the P achieving the trace distance at the best direct candidate
            Mat o1, o2;
            double bound;
            outputs(best_psi * dagger(best_psi), &o1, &o2, &bound);
            p = support_projector(positive_part(o1 - o2));
        } else {
            p = frng.random_psd(d);
            const double top = lambda_max(p);
            if (top > 1.0) p = (1.0 / top) * p;
        }
        Verdict inst = split_valid_core(guard, sem, p, herm_part(id - p));
        if (inst.status == Status::valid) continue;
        if (inst.counterexample) {
            const double m = margin_of(*inst.counterexample);
            if (m > 1e-6) {
                v.status = Status::invalid;
                v.counterexample = inst.counterexample;
                v.margin = m;
                v.reason = "judgment instance produced a coupled pair violating the "
                           "trace-distance bound";
                return v;
            }
        }
        ++boundary_failures;
    }
    if (boundary_failures > 0) {
        v.status = Status::unknown;
        v.sampled = true;
        v.reason = std::to_string(boundary_failures) +
                   " judgment instance(s) failed at the tolerance boundary without a "
                   "confirmable witness";
        return v;
    }
    v.status = Status::valid;
    v.sampled = true;
    v.reason = "no violation found at budget; direct and judgment routes agree";
    return v;
}

double diamond_distance(const Superoperator& e1, const Superoperator& e2,
                        const SdpOptions& opts) {
    if (e1.in_dim != e2.in_dim || e1.out_dim != e2.out_dim)
        throw std::invalid_argument("diamond_distance: dimension mismatch");
    const int din = e1.in_dim, dout = e1.out_dim;
    const int dw = din * dout;
    Mat j = herm_part(choi_matrix(e1) - choi_matrix(e2));  // on H_in (x) H_out

    SdpProblem prob;
    prob.block_dims = {dw, dw, din};
    prob.objective = {(-2.0) * j, Mat::zero(dw, dw), herm_part(partial_trace(j, 1, din, dout))};
    for (const auto& h : hermitian_basis(dw)) {
        SdpConstraint con;
        con.coeff = {h, h, (-1.0) * partial_trace(h, 1, din, dout)};
        con.rhs = 0.0;
        prob.constraints.push_back(std::move(con));
    }
    SdpConstraint tr_con;
    tr_con.coeff = {Mat::zero(dw, dw), Mat::zero(dw, dw), Mat::identity(din)};
    tr_con.rhs = 1.0;
    prob.constraints.push_back(std::move(tr_con));

    SdpSolution sol = sdp_solve(prob, opts);
    if (sol.status != SdpStatus::optimal)
        throw std::runtime_error(std::string("diamond_distance: solver failed (") +
                                 sdp_status_name(sol.status) + "): " + sol.message);
    return -sol.primal_value;
}

double diamond_encoding_bound(const ProgramPtr& s1, const ProgramPtr& s2, const Environment& env,
                              const CheckBudget& budget, const std::vector<std::string>& vars1,
                              const std::vector<std::string>& vars2) {
    PairSemantics sem = pair_semantics(s1, s2, env, vars1, vars2);
    const int d = sem.dim1;
    if (sem.dim2 != d)
        throw std::invalid_argument("diamond_encoding_bound: program dimensions differ");
    if (!sem.ast1 || !sem.ast2 || !sem.loops_ok)
        throw std::invalid_argument(
            "diamond_encoding_bound: programs must be almost surely terminating");
    Superoperator ext1 = superop_tensor(sem.den1.op, superop_identity(d));
    Superoperator ext2 = superop_tensor(sem.den2.op, superop_identity(d));
    Rng root(budget.seed);
    const int D = d * d;
    return climb_pure(
        Mat::identity(D), D, budget, root,
        [&](const Mat& psi) {
            Mat rho = psi * dagger(psi);
            return 0.5 * trace_norm(herm_part(superop_apply(ext1, rho) - superop_apply(ext2, rho)));
        },
        1e300, nullptr);
}

EquivResult program_equiv(const ProgramPtr& s1, const ProgramPtr& s2, const Environment& env,
                          const CheckBudget& budget, const std::vector<std::string>& vars1,
                          const std::vector<std::string>& vars2) {
    PairSemantics sem = pair_semantics(s1, s2, env, vars1, vars2);
    if (sem.dim1 != sem.dim2) throw std::invalid_argument("program_equiv: dimension mismatch");
    const int d = sem.dim1;
    EquivResult res;
    res.choi_gap = max_abs(choi_matrix(sem.den1.op) - choi_matrix(sem.den2.op));
    res.equal = res.choi_gap <= 1e-8;
    const bool channels = sem.ast1 && sem.ast2 && sem.loops_ok;
    Rng root(budget.seed);

    if (!res.equal) {
        // Distinguishing input: basis states first, then random pure states.
        double bestv = -1.0;
        Mat best_rho;
        auto try_state = [&](const Mat& rho) {
            const double v = trace_norm(
                herm_part(superop_apply(sem.den1.op, rho) - superop_apply(sem.den2.op, rho)));
            if (v > bestv) {
                bestv = v;
                best_rho = rho;
            }
        };
        for (int k = 0; k < d; ++k) {
            Mat rho = Mat::zero(d, d);
            rho(k, k) = 1.0;
            try_state(rho);
        }
        for (int rs = 0; rs < budget.restarts; ++rs) {
            Mat psi = normalized(cgauss_vec(d, root));
            try_state(psi * dagger(psi));
        }
        res.witness_state = best_rho;
        if (channels) {
            DensityOperator o1 =
                DensityOperator::make(herm_part(superop_apply(sem.den1.op, best_rho)), 1e-7);
            DensityOperator o2 =
                DensityOperator::make(herm_part(superop_apply(sem.den2.op, best_rho)), 1e-7);
            res.witness_ts = t_stab(o1, o2).value.value();
        }
        return res;
    }

    if (!channels) return res;  // secondary certifications need channels

    // (a) stabilized-transport data processing on random trace-one pairs
    res.mono_worst = -1e300;
    const int pairs = std::max(1, budget.restarts / 2);
    for (int t = 0; t < pairs; ++t) {
        DensityOperator rho = DensityOperator::make(root.random_density(d));
        DensityOperator sigma = DensityOperator::make(root.random_density(d));
        const double tin = t_stab(rho, sigma).value.value();
        DensityOperator r2 = DensityOperator::make(herm_part(superop_apply(sem.den1.op, rho.m)), 1e-7);
        DensityOperator s2 =
            DensityOperator::make(herm_part(superop_apply(sem.den2.op, sigma.m)), 1e-7);
        const double tout = t_stab(r2, s2).value.value();
        res.mono_worst = std::max(res.mono_worst, tout - tin);
    }

    // (b) sampled instances of the bounded equivalence family: Y1, Y2 live on
    // H extended by a stabilizer qubit; each instance reduces to an exact
    // split check of {nI + P_sym_perp} s1 ~ s2 {tr_2(Y1) (x) I + I (x) (nI - tr_2(Y2))}.
    const Mat i2d = Mat::identity(2 * d);
    const Mat idn = Mat::identity(d);
    const Mat asym_big = sym_projectors(2 * d).p_asym;
    const Mat asym_pre = sym_projectors(d).p_asym;
    Rng frng = root.fork(2);
    res.family_samples = budget.family_samples;
    for (int k = 0; k < budget.family_samples; ++k) {
        Mat y1 = frng.random_psd(2 * d);
        Mat y2 = frng.random_psd(2 * d);
        const double s =
            lambda_max(herm_part(2.0 * (kron(y1, i2d) - kron(i2d, y2)) - asym_big));
        if (s > 0.0) y2 += (0.5 * s + 1e-12) * i2d;
        const double n = std::ceil(2.0 * lambda_max(y2));
        Mat q1 = herm_part(partial_trace(y1, 1, d, 2));
        Mat q2 = herm_part(n * idn - partial_trace(y2, 1, d, 2));
        IVPredicate pre = ivp_from_matrix(n * Mat::identity(d * d) + asym_pre);
        Verdict inst = split_valid_core(pre, sem, q1, q2);
        if (inst.status != Status::valid) ++res.family_failures;
    }
    return res;
}

Verdict wasserstein_lipschitz_check(const ProgramPtr& s1, const ProgramPtr& s2, double lambda,
                                    const Environment& env, const CheckBudget& budget,
                                    const std::vector<std::string>& vars1,
                                    const std::vector<std::string>& vars2) {
    if (lambda < 0.0)
        throw std::invalid_argument("wasserstein_lipschitz_check: lambda must be nonnegative");
    PairSemantics sem = pair_semantics(s1, s2, env, vars1, vars2);
    if (sem.dim1 != sem.dim2)
        throw std::invalid_argument("wasserstein_lipschitz_check: program dimensions differ");
    const Mat asym = sym_projectors(sem.dim1).p_asym;
    IVPredicate p = ivp_from_matrix((lambda * lambda) * asym);
    return check_valid_general(p, s1, s2, asym, env, budget, vars1, vars2);
}

QuantumSystemSpec qsys_from_json(const nlohmann::json& j) {
    QuantumSystemSpec s;
    s.env = env_from_json(j.at("env"));
    s.vars = j.at("vars").get<std::vector<std::string>>();
    s.agents = j.at("agents").get<std::vector<std::string>>();
    s.commands = j.at("commands").get<std::vector<std::string>>();
    int dim = 1;
    for (const auto& v : s.vars) dim *= s.env.var_dim(v);

    const std::set<std::string> agent_set(s.agents.begin(), s.agents.end());
    const std::set<std::string> cmd_set(s.commands.begin(), s.commands.end());
    for (const auto& [key, val] : j.at("do").items()) {
        const auto pos = key.find(':');
        if (pos == std::string::npos)
            throw std::invalid_argument("quantum system: do keys must look like 'agent:command'");
        const std::string agent = key.substr(0, pos), cmd = key.substr(pos + 1);
        if (!agent_set.count(agent) || !cmd_set.count(cmd))
            throw std::invalid_argument("quantum system: do entry '" + key +
                                        "' names an unknown agent or command");
        ProgramPtr prog = parse_program_or_throw(val.get<std::string>());
        Denotation den = denote_with_vars(prog, s.env, s.vars);
        if (!is_ast(den.op) || !den.loops_converged)
            throw std::invalid_argument("quantum system: do program '" + key +
                                        "' is not a channel (must terminate almost surely)");
        s.do_map[{agent, cmd}] = prog;
    }
    for (const auto& a : s.agents)
        for (const auto& c : s.commands)
            if (!s.do_map.count({a, c}))
                throw std::invalid_argument("quantum system: missing do entry for '" + a + ":" +
                                            c + "'");

    if (j.contains("measure")) {
        for (const auto& [agent, povms] : j.at("measure").items()) {
            if (!agent_set.count(agent))
                throw std::invalid_argument("quantum system: measure entry for unknown agent '" +
                                            agent + "'");
            std::vector<std::vector<Mat>> list;
            for (const auto& povm_json : povms) {
                std::vector<Mat> povm;
                Mat sum = Mat::zero(dim, dim);
                for (const auto& mj : povm_json) {
                    Mat e = mat_from_json(mj);
                    if (e.rows != dim || e.cols != dim)
                        throw std::invalid_argument(
                            "quantum system: POVM element dimension mismatch");
                    if (lambda_min(herm_part(e)) < -1e-8)
                        throw std::invalid_argument("quantum system: POVM element not PSD");
                    sum += e;
                    povm.push_back(std::move(e));
                }
                if (max_abs(sum - Mat::identity(dim)) > 1e-8)
                    throw std::invalid_argument(
                        "quantum system: POVM elements must sum to the identity");
                list.push_back(std::move(povm));
            }
            s.measure_map[agent] = std::move(list);
        }
    }
    return s;
}

NonInterferenceResult non_interference_check(const QuantumSystemSpec& spec,
                                             const std::vector<std::string>& g1,
                                             const std::vector<std::string>& g2,
                                             const std::vector<std::string>& d, int max_len) {
    if (max_len < 0 || max_len > 6)
        throw std::invalid_argument("non_interference_check: max_len must be between 0 and 6");
    const std::uint64_t actions_n =
        static_cast<std::uint64_t>(spec.agents.size()) * spec.commands.size();
    std::uint64_t total = 1, pw = 1;
    for (int k = 1; k <= max_len; ++k) {
        pw *= actions_n;
        total += pw;
    }
    if (total > 1000000)
        throw std::invalid_argument("non_interference_check: enumeration would visit " +
                                    std::to_string(total) + " sequences (limit 1000000)");
    const std::set<std::string> agent_set(spec.agents.begin(), spec.agents.end());
    for (const auto& a : g1)
        if (!agent_set.count(a))
            throw std::invalid_argument("non_interference_check: unknown agent '" + a + "'");
    for (const auto& a : g2)
        if (!agent_set.count(a))
            throw std::invalid_argument("non_interference_check: unknown agent '" + a + "'");

    int dim = 1;
    for (const auto& v : spec.vars) dim *= spec.env.var_dim(v);

    struct Action {
        std::string agent, cmd;
        Superoperator op;
        bool purged;
    };
    const std::set<std::string> g1_set(g1.begin(), g1.end());
    const std::set<std::string> d_set(d.begin(), d.end());
    std::vector<Action> actions;
    for (const auto& a : spec.agents)
        for (const auto& c : spec.commands)
            actions.push_back({a, c, denote_with_vars(spec.do_map.at({a, c}), spec.env, spec.vars).op,
                               g1_set.count(a) > 0 && d_set.count(c) > 0});

    struct Observer {
        std::string agent;
        const std::vector<std::vector<Mat>>* povms;
    };
    std::vector<Observer> observers;
    for (const auto& a : g2) {
        auto it = spec.measure_map.find(a);
        if (it != spec.measure_map.end()) observers.push_back({a, &it->second});
    }

    NonInterferenceResult res;
    res.interference_free = true;

    auto observe = [&](const Mat& full, const Mat& purged) -> bool {
        for (const auto& ob : observers) {
            for (size_t pi = 0; pi < ob.povms->size(); ++pi) {
                double dist = 0.0;
                for (const auto& e : (*ob.povms)[pi]) {
                    const double diff = trace_prod(e, full).real() - trace_prod(e, purged).real();
                    if (diff > 0.0) dist += diff;  // total variation on trace-one states
                }
                if (dist > 1e-9) {
                    res.witness = InterferenceWitness{{}, ob.agent, static_cast<int>(pi), dist};
                    return true;
                }
            }
        }
        return false;
    };

    std::function<bool(const Mat&, const Mat&, int)> dfs = [&](const Mat& full, const Mat& purged,
                                                               int depth) -> bool {
        ++res.sequences_checked;
        if (observe(full, purged)) return true;
        if (depth == max_len) return false;
        for (const auto& act : actions) {
            Mat f2 = superop_apply(act.op, full);
            Mat p2 = act.purged ? purged : superop_apply(act.op, purged);
            if (dfs(f2, p2, depth + 1)) {
                res.witness->alpha.insert(res.witness->alpha.begin(), {act.agent, act.cmd});
                return true;
            }
        }
        return false;
    };

    Mat rho0 = Mat::zero(dim, dim);
    rho0(0, 0) = 1.0;
    res.interference_free = !dfs(rho0, rho0, 0);
    return res;
}

namespace {

// Index surgery on n-qubit basis labels (qubit 0 is the most significant).
struct QubitSplit {
    int n, i;
    std::pair<int, int> split(int x) const {
        const int bit = (x >> (n - 1 - i)) & 1;
        const int hi = x >> (n - i);
        const int lo = x & ((1 << (n - 1 - i)) - 1);
        return {(hi << (n - 1 - i)) | lo, bit};
    }
    int join(int rest, int bit) const {
        const int hi = rest >> (n - 1 - i);
        const int lo = rest & ((1 << (n - 1 - i)) - 1);
        return (hi << (n - i)) | (bit << (n - 1 - i)) | lo;
    }
};

}  // namespace

Mat dp_sym_projector(int n, int i) {
    if (n < 1 || i < 0 || i >= n) throw std::invalid_argument("dp_sym_projector: bad index");
    const int dn = 1 << n;
    const int dr = 1 << (n - 1);
    const Mat psym = sym_projectors(dr).p_sym;
    const QubitSplit qs{n, i};
    Mat p = Mat::zero(dn * dn, dn * dn);
    for (int x = 0; x < dn; ++x)
        for (int y = 0; y < dn; ++y) {
            const auto [xr, xb] = qs.split(x);
            const auto [yr, yb] = qs.split(y);
            for (int xp = 0; xp < dn; ++xp)
                for (int yp = 0; yp < dn; ++yp) {
                    const auto [xpr, xpb] = qs.split(xp);
                    const auto [ypr, ypb] = qs.split(yp);
                    if (xb != xpb || yb != ypb) continue;
                    p(x * dn + y, xp * dn + yp) = psym(xr * dr + yr, xpr * dr + ypr);
                }
        }
    return p;
}

Verdict dp_check(const ProgramPtr& s, const Environment& env,
                 const std::vector<std::string>& qubits, double eps, double delta,
                 const CheckBudget& budget) {
    std::vector<std::string> qs = qubits.empty() ? program_vars(s) : qubits;
    const int n = static_cast<int>(qs.size());
    if (n < 1 || n > 3)
        throw std::invalid_argument("dp_check: supports systems of 1 to 3 qubits");
    for (const auto& q : qs)
        if (env.var_dim(q) != 2)
            throw std::invalid_argument("dp_check: variable '" + q + "' is not a qubit");
    if (eps < 0.0 || delta < 0.0)
        throw std::invalid_argument("dp_check: eps and delta must be nonnegative");
    Denotation den = denote_with_vars(s, env, qs);
    if (!is_ast(den.op) || !den.loops_converged)
        throw std::invalid_argument("dp_check: program must be almost surely terminating");

    const int dn = 1 << n;
    const double ee = std::exp(eps);
    const double tol = 1e-7;
    Verdict v;
    double worst = -1e300;
    Rng root(budget.seed);

    // Exact inner maximization over measurements and outcome sets.
    auto violation = [&](const Mat& rho, const Mat& sigma) {
        Mat a = herm_part(superop_apply(den.op, rho));
        Mat b = herm_part(superop_apply(den.op, sigma));
        return std::max(positive_part_trace(herm_part(a - ee * b)),
                        positive_part_trace(herm_part(b - ee * a))) -
               delta;
    };
    auto eval_joint = [&](const Mat& psi) {
        Mat rho = psi * dagger(psi);
        return violation(herm_part(partial_trace(rho, 1, dn, dn)),
                         herm_part(partial_trace(rho, 2, dn, dn)));
    };
    auto invalid_at = [&](int i, const Mat& psi, double m) {
        v.status = Status::invalid;
        v.counterexample = psi * dagger(psi);
        v.margin = m;
        v.falsifier_best = std::max(worst, m);
        std::ostringstream os;
        os << "neighboring pair differing at qubit " << i
           << " violates the privacy bound by " << m;
        v.reason = os.str();
        return v;
    };

    for (int i = 0; i < n; ++i) {
        const QubitSplit qsplit{n, i};
        const int dr = 1 << (n - 1);
        // Basis probes: equal rest labels, arbitrary bits on qubit i.
        for (int xr = 0; xr < dr; ++xr)
            for (int xb = 0; xb < 2; ++xb)
                for (int yb = 0; yb < 2; ++yb) {
                    const int x = qsplit.join(xr, xb), y = qsplit.join(xr, yb);
                    Mat psi = Mat::zero(dn * dn, 1);
                    psi(x * dn + y, 0) = 1.0;
                    const double m = eval_joint(psi);
                    worst = std::max(worst, m);
                    if (m > tol) return invalid_at(i, psi, m);
                }
        // Random pure joint states supported in the neighboring subspace.
        const Mat proj = dp_sym_projector(n, i);
        Rng r = root.fork(i + 1);
        Mat arg;
        const double m = climb_pure(proj, dn * dn, budget, r, eval_joint, tol, &arg);
        worst = std::max(worst, m);
        if (m > tol) return invalid_at(i, arg, m);
    }

    v.status = Status::unknown;
    v.sampled = true;
    v.falsifier_best = worst;
    std::ostringstream os;
    os << "no neighboring pair violated the bound at budget; worst margin " << worst;
    v.reason = os.str();
    return v;
}

}  // namespace qotl
