#include "qotl/logic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace qotl {

const char* status_name(Status s) {
    switch (s) {
        case Status::valid: return "Valid";
        case Status::invalid: return "Invalid";
        case Status::unknown: return "Unknown";
    }
    return "Unknown";
}

PairSemantics pair_semantics(const ProgramPtr& s1, const ProgramPtr& s2, const Environment& env,
                             const std::vector<std::string>& vars1,
                             const std::vector<std::string>& vars2) {
    PairSemantics out;
    out.den1 = denote_with_vars(s1, env, vars1.empty() ? program_vars(s1) : vars1);
    out.den2 = denote_with_vars(s2, env, vars2.empty() ? program_vars(s2) : vars2);
    out.dim1 = out.den1.dim;
    out.dim2 = out.den2.dim;
    out.ast1 = is_ast(out.den1.op);
    out.ast2 = is_ast(out.den2.op);
    out.loops_ok = out.den1.loops_converged && out.den2.loops_converged;
    return out;
}

WpResult wp_two_sided(const ProgramPtr& s1, const ProgramPtr& s2, const IVPredicate& q,
                      const Environment& env, const std::vector<std::string>& vars1,
                      const std::vector<std::string>& vars2) {
    PairSemantics sem = pair_semantics(s1, s2, env, vars1, vars2);
    if (q.dim != sem.dim1 * sem.dim2)
        throw std::invalid_argument("wp_two_sided: predicate dimension mismatch");
    WpResult out;
    out.ast1 = sem.ast1;
    out.ast2 = sem.ast2;
    out.wp = dual_apply_ivp(superop_tensor(sem.den1.op, sem.den2.op), q);
    return out;
}

std::optional<std::pair<Mat, Mat>> detect_split(const Mat& q, int d1, int d2) {
    if (!q.is_square() || q.rows != d1 * d2)
        throw std::invalid_argument("detect_split: dimension mismatch");
    Mat q1r = (1.0 / d2) * partial_trace(q, 1, d1, d2);
    Mat q2r = (1.0 / d1) * partial_trace(q, 2, d1, d2);
    const double mean = trace(q).real() / (d1 * d2);
    Mat resid = q - kron(q1r, Mat::identity(d2)) - kron(Mat::identity(d1), q2r) +
                mean * Mat::identity(d1 * d2);
    if (max_abs(resid) > 1e-9) return std::nullopt;
    // Gauge freedom (q1, q2) -> (q1 + cI, q2 - cI); pin lambda_min(q1) = 0.
    const double c = lambda_min(herm_part(q1r));
    Mat q1 = herm_part(q1r - c * Mat::identity(d1));
    Mat q2 = herm_part(q2r - (mean - c) * Mat::identity(d2));
    return std::make_pair(std::move(q1), std::move(q2));
}

namespace {

std::string format_eigvec(const Mat& vec) {
    std::ostringstream os;
    os << "[";
    const int show = std::min(vec.rows, 8);
    for (int i = 0; i < show; ++i) {
        if (i) os << ", ";
        os << vec(i, 0).real() << (vec(i, 0).imag() < 0 ? "-" : "+")
           << std::abs(vec(i, 0).imag()) << "i";
    }
    if (show < vec.rows) os << ", ...";
    os << "]";
    return os.str();
}

// Explains a failed ivp_leq(a, b): either a's infinite part escapes b's, or
// the bottom eigenpair of the compressed finite difference.
std::string loewner_violation_desc(const IVPredicate& a, const IVPredicate& b) {
    Mat pi = Mat::identity(b.dim) - b.inf_proj;
    Mat escape = herm_part(pi * a.inf_proj * pi);
    if (max_abs(escape) > 1e-8)
        return "the left infinite subspace escapes the right one";
    auto eg = herm_eig(herm_part(pi * (b.finite - a.finite) * pi));
    const double lam = eg.values.back();
    Mat vec(b.dim, 1);
    for (int i = 0; i < b.dim; ++i) vec(i, 0) = eg.vectors(i, b.dim - 1);
    return "violating eigenvalue " + std::to_string(lam) + " with eigenvector " +
           format_eigvec(vec);
}

Mat column(const Mat& m, int j) {
    Mat v(m.rows, 1);
    for (int i = 0; i < m.rows; ++i) v(i, 0) = m(i, j);
    return v;
}

Mat normalized(const Mat& v) {
    double n2 = 0.0;
    for (const auto& z : v.a) n2 += std::norm(z);
    const double n = std::sqrt(n2);
    if (n == 0.0) return v;
    return (1.0 / n) * v;
}

// Semantic violation margin at an input state: T_Q over partial couplings of
// the two program outputs minus tr(P rho). cls: 0 finite, -1 when tr(P rho)
// is infinite (the state cannot falsify anything).
struct MarginEval {
    const IVPredicate& p;
    IVPredicate cost;
    const PairSemantics& sem;
    TransportOptions topts;

    struct Val {
        int cls = 0;
        double v = 0.0;
    };

    Val eval(const Mat& rho) const {
        ExtReal pr = ivp_trace(p, rho);
        if (pr.is_inf()) return {-1, 0.0};
        Mat out1 = herm_part(superop_apply(sem.den1.op, partial_trace(rho, 1, sem.dim1, sem.dim2)));
        Mat out2 = herm_part(superop_apply(sem.den2.op, partial_trace(rho, 2, sem.dim1, sem.dim2)));
        TransportResult t = transport_value(cost, DensityOperator::make(out1, 1e-7),
                                            DensityOperator::make(out2, 1e-7),
                                            TransportMode::partial, topts);
        if (t.value.is_inf()) return {1, 0.0};
        return {0, t.value.value() - pr.value()};
    }

    Val eval_pure(const Mat& psi) const { return eval(psi * dagger(psi)); }
};

double margin_score(const MarginEval::Val& v) {
    if (v.cls < 0) return -1e300;
    if (v.cls > 0) return 1e300;
    return v.v;
}

}  // namespace

Verdict split_valid_core(const IVPredicate& p, const PairSemantics& sem, const Mat& q1,
                         const Mat& q2) {
    const int d1 = sem.dim1, d2 = sem.dim2;
    if (p.dim != d1 * d2 || q1.rows != d1 || q2.rows != d2)
        throw std::invalid_argument("split_valid_core: dimension mismatch");
    Verdict v;
    if (!sem.loops_ok) {
        v.reason = "loop fixpoint iteration did not converge";
        return v;
    }
    if (!sem.ast1 || !sem.ast2) {
        v.reason =
            "program(s) not almost surely terminating; the exact split characterization "
            "requires quantum channels";
        return v;
    }
    Mat w1 = herm_part(superop_dual_apply(sem.den1.op, herm_part(q1)));
    Mat w2 = herm_part(superop_dual_apply(sem.den2.op, herm_part(q2)));
    Mat w = kron(w1, Mat::identity(d2)) + kron(Mat::identity(d1), w2);
    if (ivp_leq(ivp_from_matrix(w), p)) {
        v.status = Status::valid;
        v.reason = "split weakest precondition is dominated by the precondition";
        return v;
    }
    v.status = Status::invalid;
    // Bottom eigenpair of the compressed difference is the candidate witness.
    Mat pi = Mat::identity(p.dim) - p.inf_proj;
    auto eg = herm_eig(herm_part(pi * (p.finite - w) * pi));
    Mat psi = normalized(column(eg.vectors, p.dim - 1));
    Mat rho = psi * dagger(psi);
    Mat cost = kron(herm_part(q1), Mat::identity(d2)) + kron(Mat::identity(d1), herm_part(q2));
    Mat out1 = herm_part(superop_apply(sem.den1.op, partial_trace(rho, 1, d1, d2)));
    Mat out2 = herm_part(superop_apply(sem.den2.op, partial_trace(rho, 2, d1, d2)));
    TransportResult t = transport_value(ivp_from_matrix(cost), DensityOperator::make(out1, 1e-7),
                                        DensityOperator::make(out2, 1e-7), TransportMode::partial);
    ExtReal pr = ivp_trace(p, rho);
    const double margin =
        (t.value.is_inf() || pr.is_inf()) ? 0.0 : t.value.value() - pr.value();
    if (margin > 1e-6) {
        v.counterexample = rho;
        v.margin = margin;
        v.reason = "split weakest precondition exceeds the precondition; eigenvector witness "
                   "re-verified semantically";
    } else {
        v.reason = "split weakest precondition exceeds the precondition at the tolerance "
                   "boundary (re-verified margin " +
                   std::to_string(margin) + " too small to certify a state)";
    }
    v.falsifier_best = margin;
    return v;
}

Verdict check_split_valid(const IVPredicate& p, const ProgramPtr& s1, const ProgramPtr& s2,
                          const Mat& q1, const Mat& q2, const Environment& env,
                          const std::vector<std::string>& vars1,
                          const std::vector<std::string>& vars2) {
    PairSemantics sem = pair_semantics(s1, s2, env, vars1, vars2);
    return split_valid_core(p, sem, q1, q2);
}

std::vector<DualityInstance> sample_duality_family(const Mat& q, int d1, int d2, int count,
                                                   Rng& rng) {
    if (q.rows != d1 * d2) throw std::invalid_argument("sample_duality_family: dims");
    std::vector<DualityInstance> out;
    out.reserve(count);
    const Mat i1 = Mat::identity(d1), i2 = Mat::identity(d2);
    for (int k = 0; k < count; ++k) {
        DualityInstance inst;
        inst.y1 = rng.random_psd(d1);
        inst.y2 = rng.random_psd(d2);
        // Lift Y2 until q >= Y1 (x) I - I (x) Y2.
        const double s = lambda_max(herm_part(kron(inst.y1, i2) - kron(i1, inst.y2) - q));
        if (s > 0.0) inst.y2 += (s + 1e-12) * i2;
        inst.n = std::ceil(lambda_max(inst.y2));
        out.push_back(std::move(inst));
    }
    return out;
}

Verdict check_valid_general(const IVPredicate& p, const ProgramPtr& s1, const ProgramPtr& s2,
                            const Mat& q, const Environment& env, const CheckBudget& budget,
                            const std::vector<std::string>& vars1,
                            const std::vector<std::string>& vars2) {
    PairSemantics sem = pair_semantics(s1, s2, env, vars1, vars2);
    const int d1 = sem.dim1, d2 = sem.dim2;
    const int D = d1 * d2;
    if (p.dim != D || q.rows != D)
        throw std::invalid_argument("check_valid_general: predicate dimension mismatch");

    // Phase 1: exact reduction for tensor-sum postconditions.
    const bool channels = sem.ast1 && sem.ast2 && sem.loops_ok;
    if (channels) {
        if (auto split = detect_split(herm_part(q), d1, d2)) {
            return split_valid_core(p, sem, split->first, split->second);
        }
    }

    Verdict v;
    MarginEval me{p, ivp_from_matrix(herm_part(q)), sem, {}};
    Rng root(budget.seed);

    auto report_invalid = [&](const Mat& rho, double seen) -> Verdict {
        // Independent recomputation before committing to the verdict.
        auto re = me.eval(rho);
        if (re.cls == 0 && re.v > 1e-6) {
            v.status = Status::invalid;
            v.counterexample = rho;
            v.margin = re.v;
            v.falsifier_best = std::max(v.falsifier_best, re.v);
            v.reason = "found an input state whose output transport cost exceeds the "
                       "precondition expectation";
            return v;
        }
        v.falsifier_best = std::max(v.falsifier_best, seen);
        return v;  // stays unknown; caller continues
    };

    // Phase 2: multi-start falsification over pure input states.
    double best = -1e300;
    v.falsifier_best = -1e300;
    for (int rs = 0; rs < budget.restarts; ++rs) {
        Rng r = root.fork(rs + 1);
        Mat psi(D, 1);
        if (rs % 2 == 0) {
            for (int i = 0; i < D; ++i) psi(i, 0) = r.cgauss();
        } else {
            // basis vector with a small random halo
            const int k = r.uniform_int(0, D - 1);
            for (int i = 0; i < D; ++i) psi(i, 0) = 0.1 * r.cgauss();
            psi(k, 0) += 1.0;
        }
        psi = normalized(psi);
        double cur = margin_score(me.eval_pure(psi));
        double step = 0.5;
        for (int sw = 0; sw < budget.sweeps && cur <= 1e-6; ++sw) {
            Mat dir(D, 1);
            for (int i = 0; i < D; ++i) dir(i, 0) = r.cgauss();
            bool improved = false;
            for (double sgn : {1.0, -1.0}) {
                Mat cand = normalized(psi + (sgn * step) * dir);
                const double cv = margin_score(me.eval_pure(cand));
                if (cv > cur + 1e-14) {
                    psi = cand;
                    cur = cv;
                    improved = true;
                    break;
                }
            }
            if (!improved) step *= 0.7;
        }
        best = std::max(best, cur);
        if (cur > 1e-6) {
            Verdict got = report_invalid(psi * dagger(psi), cur);
            if (got.status == Status::invalid) return got;
        }
    }
    v.falsifier_best = std::max(v.falsifier_best, best);

    // Phase 3: sampled dual-family certification search. A family instance
    // (Y1, Y2) with q >= Y1 (x) I - I (x) Y2 whose pulled-back combination
    // escapes p marks a candidate violation; candidates are confirmed
    // semantically before any verdict.
    const Mat i1 = Mat::identity(d1), i2 = Mat::identity(d2);
    Mat pi = Mat::identity(D) - p.inf_proj;
    auto violation = [&](const Mat& y1, const Mat& y2, Mat* vec) {
        Mat g = kron(herm_part(superop_dual_apply(sem.den1.op, y1)), i2) -
                kron(i1, herm_part(superop_dual_apply(sem.den2.op, y2))) - p.finite;
        auto eg = herm_eig(herm_part(pi * g * pi));
        if (vec) *vec = normalized(column(eg.vectors, 0));
        return eg.values.front();
    };

    Rng fam_rng = root.fork(0xF00D);
    auto fam = sample_duality_family(herm_part(q), d1, d2, budget.family_samples, fam_rng);
    double certbest = -1e300;
    for (const auto& inst : fam) {
        Mat y1 = inst.y1, y2 = inst.y2, vec;
        double lam = violation(y1, y2, &vec);
        double eta = 0.25;
        for (int st = 0; st < budget.ascent_steps; ++st) {
            Mat rho = vec * dagger(vec);
            Mat g1 = herm_part(superop_apply(sem.den1.op, partial_trace(rho, 1, d1, d2)));
            Mat g2 = herm_part(superop_apply(sem.den2.op, partial_trace(rho, 2, d1, d2)));
            Mat ny1 = positive_part(y1 + eta * g1);
            Mat ny2 = positive_part(y2 - eta * g2);
            const double s = lambda_max(herm_part(kron(ny1, i2) - kron(i1, ny2) - q));
            if (s > 0.0) ny2 += (s + 1e-12) * i2;
            Mat nvec;
            const double nlam = violation(ny1, ny2, &nvec);
            if (nlam > lam) {
                y1 = std::move(ny1);
                y2 = std::move(ny2);
                lam = nlam;
                vec = std::move(nvec);
            } else {
                eta *= 0.5;
            }
        }
        certbest = std::max(certbest, lam);
        if (lam > 1e-7) {
            Verdict got = report_invalid(vec * dagger(vec), v.falsifier_best);
            if (got.status == Status::invalid) {
                got.certificate_best = certbest;
                return got;
            }
        }
    }
    v.certificate_best = certbest;
    v.status = Status::unknown;
    v.sampled = true;
    std::ostringstream os;
    os << "no decision at budget (restarts " << budget.restarts << ", family samples "
       << budget.family_samples << "); best falsifier margin " << v.falsifier_best
       << ", best dual-family violation " << certbest;
    if (!channels)
        os << "; note: program pair is not almost surely terminating, the exact split "
              "reduction was skipped";
    v.reason = os.str();
    return v;
}

bool measurement_condition(const std::vector<Mat>& m, const std::vector<Mat>& n,
                           const DensityOperator& rho, const DensityOperator& sigma,
                           double tol) {
    if (m.size() != n.size())
        throw std::invalid_argument("measurement_condition: outcome counts differ");
    for (size_t i = 0; i < m.size(); ++i) {
        const double a = trace_prod(dagger(m[i]) * m[i], rho.m).real();
        const double b = trace_prod(dagger(n[i]) * n[i], sigma.m).real();
        if (std::abs(a - b) > tol) return false;
    }
    return true;
}

MeasPropertyResult measurement_property_check(const IVPredicate& p, const std::vector<Mat>& m,
                                              const std::vector<Mat>& n,
                                              const std::vector<IVPredicate>& q,
                                              const DensityOperator& rho,
                                              const DensityOperator& sigma, double tol) {
    if (m.size() != n.size() || q.size() != m.size())
        throw std::invalid_argument("measurement_property_check: outcome counts differ");
    MeasPropertyResult res;
    TransportResult tp = transport_value(p, rho, sigma, TransportMode::partial);
    res.t_p = tp.value;
    if (tp.value.is_inf()) {
        res.holds = true;
        res.diagnostic = "vacuous: the precondition transport value is infinite";
        return res;
    }
    // The coupling families of distinct outcomes share no constraints, so the
    // joint minimum is the sum of per-outcome transport values. Each branch
    // pair has matched traces (checked below), so exact couplings apply.
    double total = 0.0;
    for (size_t i = 0; i < m.size(); ++i) {
        const Mat a = herm_part(m[i] * rho.m * dagger(m[i]));
        const Mat b = herm_part(n[i] * sigma.m * dagger(n[i]));
        const double pa = trace(a).real(), pb = trace(b).real();
        if (std::abs(pa - pb) > 1e-9) {
            res.holds = false;
            res.coupled_best = ExtReal::infinity();
            res.diagnostic = "outcome " + std::to_string(i) +
                             ": branch probabilities differ (" + std::to_string(pa) + " vs " +
                             std::to_string(pb) + "); no coupling exists";
            return res;
        }
        if (pa <= 1e-9) continue;  // zero-probability branch couples trivially by 0
        if (q[i].dim != rho.dim * sigma.dim)
            throw std::invalid_argument("measurement_property_check: predicate dims");
        TransportResult ti = transport_value(q[i], DensityOperator::make(a),
                                             DensityOperator::make(b), TransportMode::exact);
        if (ti.value.is_inf()) {
            res.holds = false;
            res.coupled_best = ExtReal::infinity();
            res.diagnostic = "outcome " + std::to_string(i) +
                             ": every coupling meets the infinite region of its predicate";
            return res;
        }
        total += ti.value.value();
    }
    res.coupled_best = ExtReal::finite(total);
    res.holds = total <= tp.value.value() + tol;
    if (!res.holds)
        res.diagnostic = "minimal coupled cost " + std::to_string(total) +
                         " exceeds T_P = " + std::to_string(tp.value.value());
    return res;
}

// ---------------------------------------------------------------------------
// Derivation checking
// ---------------------------------------------------------------------------

namespace {

struct DerivCtx {
    Environment env;
    std::vector<std::string> vars1, vars2;
    int d1 = 1, d2 = 1;
    int samples = 64;
    int pair_samples = 8;
    uint64_t seed = 0;
    DerivationReport* rep = nullptr;
    int node_counter = 0;
    std::map<std::string, Denotation> cache1, cache2;

    const Denotation& den(int side, const ProgramPtr& p) {
        auto& cache = side == 1 ? cache1 : cache2;
        const auto& vars = side == 1 ? vars1 : vars2;
        const std::string key = program_to_string(p);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, denote_with_vars(p, env, vars)).first;
        return it->second;
    }

    PairSemantics sem(const ProgramPtr& p1, const ProgramPtr& p2) {
        PairSemantics s;
        s.den1 = den(1, p1);
        s.den2 = den(2, p2);
        s.dim1 = s.den1.dim;
        s.dim2 = s.den2.dim;
        s.ast1 = is_ast(s.den1.op);
        s.ast2 = is_ast(s.den2.op);
        s.loops_ok = s.den1.loops_converged && s.den2.loops_converged;
        return s;
    }
};

struct NodeData {
    std::string rule;
    IVPredicate pre, post;
    ProgramPtr p1, p2;
};

void fail(DerivCtx& c, const std::string& path, const std::string& msg) {
    c.rep->ok = false;
    c.rep->failures.push_back(path + ": " + msg);
}

bool ivp_eq(const IVPredicate& a, const IVPredicate& b) {
    return ivp_leq(a, b, 1e-8) && ivp_leq(b, a, 1e-8);
}

// Conjugation (a (x) I)^dag P (a (x) I) on side 1, mirrored on side 2.
IVPredicate conj_side(DerivCtx& c, int side, const Mat& a, const IVPredicate& p) {
    Mat full = side == 1 ? kron(a, Mat::identity(c.d2)) : kron(Mat::identity(c.d1), a);
    return ivp_conj(full, p);
}

std::optional<NodeData> check_node(const nlohmann::json& n, const std::string& path, DerivCtx& c);

std::vector<std::optional<NodeData>> check_premises(const nlohmann::json& n,
                                                    const std::string& path, DerivCtx& c) {
    std::vector<std::optional<NodeData>> out;
    if (!n.contains("premises")) return out;
    const auto& arr = n.at("premises");
    for (size_t i = 0; i < arr.size(); ++i)
        out.push_back(check_node(arr[i], path + ".premises[" + std::to_string(i) + "]", c));
    return out;
}

bool expect_arity(DerivCtx& c, const std::string& path, const NodeData& d,
                  const std::vector<std::optional<NodeData>>& prems, size_t want) {
    if (prems.size() != want) {
        fail(c, path, "rule (" + d.rule + ") expects " + std::to_string(want) + " premise(s), got " +
                          std::to_string(prems.size()));
        return false;
    }
    for (const auto& p : prems)
        if (!p) return false;  // failure already recorded deeper
    return true;
}

void check_wp_leaf(DerivCtx& c, const std::string& path, const NodeData& d, int side,
                   Program::Kind kind, const char* what) {
    const ProgramPtr& act = side == 1 ? d.p1 : d.p2;
    const ProgramPtr& idle = side == 1 ? d.p2 : d.p1;
    if (act->kind != kind) {
        fail(c, path, std::string("rule (") + d.rule + ") needs " + what + " on side " +
                          std::to_string(side));
        return;
    }
    if (idle->kind != Program::Kind::skip) {
        fail(c, path, "rule (" + d.rule + ") needs skip on the passive side");
        return;
    }
    Superoperator joint = side == 1
                              ? superop_tensor(c.den(1, act).op, superop_identity(c.d2))
                              : superop_tensor(superop_identity(c.d1), c.den(2, act).op);
    IVPredicate wp = dual_apply_ivp(joint, d.post);
    if (!ivp_eq(d.pre, wp))
        fail(c, path, "precondition does not match the rule schema: " +
                          loewner_violation_desc(d.pre, wp));
}

void check_if_rule(DerivCtx& c, const std::string& path, const NodeData& d,
                   const std::vector<std::optional<NodeData>>& prems, int side) {
    const ProgramPtr& act = side == 1 ? d.p1 : d.p2;
    const ProgramPtr& idle = side == 1 ? d.p2 : d.p1;
    if (act->kind != Program::Kind::ifmeas || idle->kind != Program::Kind::skip) {
        fail(c, path, "rule (" + d.rule + ") needs an if statement against skip");
        return;
    }
    if (prems.size() != act->children.size()) {
        fail(c, path, "premise count does not match branch count");
        return;
    }
    int sub = 1;
    const auto& vars = side == 1 ? c.vars1 : c.vars2;
    for (const auto& v : act->vars) sub *= c.env.var_dim(v);
    std::vector<Mat> ms = c.env.measurement(act->name, sub);
    if (ms.size() != act->children.size()) {
        fail(c, path, "if statement does not cover all outcomes");
        return;
    }
    IVPredicate recomputed = ivp_zero(c.d1 * c.d2);
    for (size_t bi = 0; bi < prems.size(); ++bi) {
        if (!prems[bi]) return;
        const NodeData& pr = *prems[bi];
        const ProgramPtr& branch = act->children[bi];
        const ProgramPtr& pr_act = side == 1 ? pr.p1 : pr.p2;
        const ProgramPtr& pr_idle = side == 1 ? pr.p2 : pr.p1;
        if (!program_equal(pr_act, branch) || pr_idle->kind != Program::Kind::skip) {
            fail(c, path, "premise " + std::to_string(bi) + " does not match branch program");
            return;
        }
        if (!ivp_eq(pr.post, d.post)) {
            fail(c, path, "premise " + std::to_string(bi) + " postcondition differs from the conclusion's");
            return;
        }
        Mat emb = embed_operator(ms[act->outcomes[bi]], act->vars, c.env, vars);
        recomputed = ivp_add(recomputed, conj_side(c, side, emb, pr.pre));
    }
    if (!ivp_eq(d.pre, recomputed))
        fail(c, path, "precondition does not match the measured sum of premise preconditions: " +
                          loewner_violation_desc(d.pre, recomputed));
}

void check_while_one_sided(DerivCtx& c, const std::string& path, const NodeData& d,
                           const std::vector<std::optional<NodeData>>& prems, int side) {
    const ProgramPtr& act = side == 1 ? d.p1 : d.p2;
    const ProgramPtr& idle = side == 1 ? d.p2 : d.p1;
    if (act->kind != Program::Kind::whilemeas || idle->kind != Program::Kind::skip) {
        fail(c, path, "rule (" + d.rule + ") needs a while statement against skip");
        return;
    }
    const NodeData& pr = *prems[0];
    const ProgramPtr& pr_act = side == 1 ? pr.p1 : pr.p2;
    const ProgramPtr& pr_idle = side == 1 ? pr.p2 : pr.p1;
    if (!program_equal(pr_act, act->children[0]) || pr_idle->kind != Program::Kind::skip) {
        fail(c, path, "premise program does not match the loop body");
        return;
    }
    int sub = 1;
    const auto& vars = side == 1 ? c.vars1 : c.vars2;
    for (const auto& v : act->vars) sub *= c.env.var_dim(v);
    std::vector<Mat> ms = c.env.measurement(act->name, sub);
    if (ms.size() != 2) {
        fail(c, path, "while guard must have exactly two outcomes");
        return;
    }
    Mat m0 = embed_operator(ms[0], act->vars, c.env, vars);
    Mat m1 = embed_operator(ms[1], act->vars, c.env, vars);
    IVPredicate w = ivp_add(conj_side(c, side, m0, d.post), conj_side(c, side, m1, pr.pre));
    if (!ivp_eq(pr.post, w)) {
        fail(c, path, "premise postcondition does not match the loop invariant combination: " +
                          loewner_violation_desc(pr.post, w));
        return;
    }
    if (!ivp_eq(d.pre, w))
        fail(c, path, "conclusion precondition does not match the loop invariant combination: " +
                          loewner_violation_desc(d.pre, w));
}

void check_duality(DerivCtx& c, const std::string& path, const NodeData& d,
                   const nlohmann::json& n) {
    if (max_abs(d.post.inf_proj) > 0.5) {
        fail(c, path, "rule (duality) requires a bounded (finite) postcondition");
        return;
    }
    PairSemantics sem = c.sem(d.p1, d.p2);
    if (!sem.ast1 || !sem.ast2 || !sem.loops_ok) {
        fail(c, path, "rule (duality) requires almost surely terminating programs");
        return;
    }
    c.rep->sampled = true;
    const int cnt = n.value("samples", c.samples);
    Rng rng(c.seed + 0x9E3779B97F4A7C15ull * static_cast<uint64_t>(c.node_counter));
    auto fam = sample_duality_family(d.post.finite, c.d1, c.d2, cnt, rng);
    const Mat i1 = Mat::identity(c.d1), i2 = Mat::identity(c.d2);
    for (size_t k = 0; k < fam.size(); ++k) {
        const auto& inst = fam[k];
        IVPredicate pre_n = ivp_add(d.pre, ivp_from_matrix(inst.n * Mat::identity(c.d1 * c.d2)));
        Mat q2 = herm_part(inst.n * i2 - inst.y2);
        Verdict v = split_valid_core(pre_n, sem, inst.y1, q2);
        if (v.status != Status::valid) {
            fail(c, path, "sampled premise instance " + std::to_string(k) +
                              " is not valid: " + v.reason);
            return;
        }
    }
}

void discharge_measure_property(DerivCtx& c, const std::string& path, const IVPredicate& pre,
                                const std::vector<Mat>& mm, const std::vector<Mat>& nn,
                                const std::vector<IVPredicate>& qs, const nlohmann::json& n) {
    c.rep->sampled = true;
    const int pairs = n.value("pair_samples", c.pair_samples);
    Rng rng(c.seed + 0xC2B2AE3D27D4EB4Full * static_cast<uint64_t>(c.node_counter));
    for (int t = 0; t < pairs; ++t) {
        DensityOperator rho = DensityOperator::make(rng.random_density(c.d1));
        DensityOperator sigma = (c.d1 == c.d2 && t % 2 == 0)
                                    ? rho
                                    : DensityOperator::make(rng.random_density(c.d2));
        auto res = measurement_property_check(pre, mm, nn, qs, rho, sigma);
        if (!res.holds) {
            fail(c, path, "measurement property fails at sampled pair " + std::to_string(t) +
                              ": " + res.diagnostic);
            return;
        }
    }
}

void check_two_sided_if(DerivCtx& c, const std::string& path, const NodeData& d,
                        const std::vector<std::optional<NodeData>>& prems,
                        const nlohmann::json& n) {
    if (d.p1->kind != Program::Kind::ifmeas || d.p2->kind != Program::Kind::ifmeas) {
        fail(c, path, "rule (if) needs if statements on both sides");
        return;
    }
    const size_t k = d.p1->children.size();
    if (d.p2->children.size() != k || prems.size() != k) {
        fail(c, path, "branch/premise counts do not agree");
        return;
    }
    if (d.p1->outcomes != d.p2->outcomes) {
        fail(c, path, "outcome labels must align between the two if statements");
        return;
    }
    int sub1 = 1, sub2 = 1;
    for (const auto& v : d.p1->vars) sub1 *= c.env.var_dim(v);
    for (const auto& v : d.p2->vars) sub2 *= c.env.var_dim(v);
    std::vector<Mat> ms1 = c.env.measurement(d.p1->name, sub1);
    std::vector<Mat> ms2 = c.env.measurement(d.p2->name, sub2);
    if (ms1.size() != k || ms2.size() != k) {
        fail(c, path, "if statements must cover all outcomes");
        return;
    }
    std::vector<Mat> mm, nn;
    std::vector<IVPredicate> qs;
    for (size_t bi = 0; bi < k; ++bi) {
        if (!prems[bi]) return;
        const NodeData& pr = *prems[bi];
        if (!program_equal(pr.p1, d.p1->children[bi]) ||
            !program_equal(pr.p2, d.p2->children[bi])) {
            fail(c, path, "premise " + std::to_string(bi) + " does not match the branch programs");
            return;
        }
        if (!ivp_eq(pr.post, d.post)) {
            fail(c, path, "premise " + std::to_string(bi) + " postcondition differs from the conclusion's");
            return;
        }
        const int label = d.p1->outcomes[bi];
        mm.push_back(embed_operator(ms1[label], d.p1->vars, c.env, c.vars1));
        nn.push_back(embed_operator(ms2[label], d.p2->vars, c.env, c.vars2));
        qs.push_back(pr.pre);
    }
    discharge_measure_property(c, path, d.pre, mm, nn, qs, n);
}

void check_two_sided_while(DerivCtx& c, const std::string& path, const NodeData& d,
                           const std::vector<std::optional<NodeData>>& prems,
                           const nlohmann::json& n) {
    if (d.p1->kind != Program::Kind::whilemeas || d.p2->kind != Program::Kind::whilemeas) {
        fail(c, path, "rule (while) needs while statements on both sides");
        return;
    }
    const NodeData& pr = *prems[0];
    if (!program_equal(pr.p1, d.p1->children[0]) || !program_equal(pr.p2, d.p2->children[0])) {
        fail(c, path, "premise programs do not match the loop bodies");
        return;
    }
    if (!ivp_eq(pr.post, d.pre)) {
        fail(c, path, "premise postcondition must equal the loop invariant (conclusion "
                      "precondition)");
        return;
    }
    int sub1 = 1, sub2 = 1;
    for (const auto& v : d.p1->vars) sub1 *= c.env.var_dim(v);
    for (const auto& v : d.p2->vars) sub2 *= c.env.var_dim(v);
    std::vector<Mat> ms1 = c.env.measurement(d.p1->name, sub1);
    std::vector<Mat> ms2 = c.env.measurement(d.p2->name, sub2);
    if (ms1.size() != 2 || ms2.size() != 2) {
        fail(c, path, "while guards must have exactly two outcomes");
        return;
    }
    std::vector<Mat> mm = {embed_operator(ms1[0], d.p1->vars, c.env, c.vars1),
                           embed_operator(ms1[1], d.p1->vars, c.env, c.vars1)};
    std::vector<Mat> nn = {embed_operator(ms2[0], d.p2->vars, c.env, c.vars2),
                           embed_operator(ms2[1], d.p2->vars, c.env, c.vars2)};
    std::vector<IVPredicate> qs = {d.post, pr.pre};
    discharge_measure_property(c, path, d.pre, mm, nn, qs, n);
}

void check_seq_shape(DerivCtx& c, const std::string& path, const NodeData& d,
                     const NodeData& a, const NodeData& b) {
    if (!program_equal(d.p1, prog_seq(a.p1, b.p1)) || !program_equal(d.p2, prog_seq(a.p2, b.p2))) {
        fail(c, path, "conclusion programs are not the premise compositions");
        return;
    }
    if (!ivp_eq(d.pre, a.pre))
        fail(c, path, "conclusion precondition differs from the first premise's");
    if (!ivp_eq(a.post, b.pre))
        fail(c, path, "intermediate predicates of the premises do not agree: " +
                          loewner_violation_desc(a.post, b.pre));
    if (!ivp_eq(b.post, d.post))
        fail(c, path, "conclusion postcondition differs from the second premise's");
}

void check_seq_plus(DerivCtx& c, const std::string& path, const NodeData& d,
                    const std::vector<std::optional<NodeData>>& prems, const nlohmann::json& n) {
    const NodeData& a = *prems[0];
    const NodeData& b = *prems[1];
    check_seq_shape(c, path, d, a, b);
    if (!n.contains("assumption")) return;  // empty carried context: plain composition
    const auto& as = n.at("assumption");
    c.rep->sampled = true;
    std::vector<std::string> mvars = as.at("vars1").get<std::vector<std::string>>();
    std::vector<std::string> nvars = as.at("vars2").get<std::vector<std::string>>();
    int sub1 = 1, sub2 = 1;
    for (const auto& v : mvars) sub1 *= c.env.var_dim(v);
    for (const auto& v : nvars) sub2 *= c.env.var_dim(v);
    std::vector<Mat> ms = c.env.measurement(as.at("m").get<std::string>(), sub1);
    std::vector<Mat> ns = c.env.measurement(as.at("n").get<std::string>(), sub2);
    if (ms.size() != ns.size()) {
        fail(c, path, "assumption measurements have different outcome counts");
        return;
    }
    std::vector<Mat> mm, nn;
    for (size_t i = 0; i < ms.size(); ++i) {
        mm.push_back(embed_operator(ms[i], mvars, c.env, c.vars1));
        nn.push_back(embed_operator(ns[i], nvars, c.env, c.vars2));
    }
    // Entailment of the measurement condition after (S1, S1'): sampled
    // instances of the dual family, each an exact split check {nI} ... .
    PairSemantics sem = c.sem(a.p1, a.p2);
    if (!sem.ast1 || !sem.ast2 || !sem.loops_ok) {
        fail(c, path, "entailment discharge requires almost surely terminating prefixes");
        return;
    }
    const int cnt = n.value("samples", c.samples);
    Rng rng(c.seed + 0xA24BAED4963EE407ull * static_cast<uint64_t>(c.node_counter));
    const size_t k = ms.size();
    const Mat i1 = Mat::identity(c.d1), i2 = Mat::identity(c.d2);
    for (int s = 0; s < cnt; ++s) {
        std::vector<Mat> ys, zs;
        double nval = 0.0;
        for (size_t i = 0; i < k; ++i) {
            Mat y = rng.random_psd(c.d1);
            const double ymax = lambda_max(y);
            if (ymax > 1.0) y = (1.0 / ymax) * y;  // cross conditions need Y_i <= I
            Mat z = rng.random_psd(c.d2);
            const double lift = lambda_max(y) - lambda_min(z);
            if (lift > 0.0) z += (lift + 1e-12) * i2;
            nval = std::max(nval, std::ceil(lambda_max(z)));
            ys.push_back(std::move(y));
            zs.push_back(std::move(z));
        }
        Mat q1 = Mat::zero(c.d1, c.d1), sum2 = Mat::zero(c.d2, c.d2);
        for (size_t i = 0; i < k; ++i) {
            q1 += dagger(mm[i]) * ys[i] * mm[i];
            sum2 += dagger(nn[i]) * zs[i] * nn[i];
        }
        Mat q2 = herm_part(nval * i2 - sum2);
        IVPredicate pre_n = ivp_from_matrix(nval * Mat::identity(c.d1 * c.d2));
        Verdict v = split_valid_core(pre_n, sem, herm_part(q1), q2);
        if (v.status != Status::valid) {
            fail(c, path, "entailment instance " + std::to_string(s) + " is not valid: " +
                              v.reason);
            return;
        }
    }
}

std::optional<NodeData> check_node(const nlohmann::json& n, const std::string& path,
                                   DerivCtx& c) {
    ++c.rep->nodes_checked;
    ++c.node_counter;
    NodeData d;
    try {
        d.rule = n.at("rule").get<std::string>();
        d.pre = ivp_from_json(n.at("pre"));
        d.post = ivp_from_json(n.at("post"));
        d.p1 = parse_program_or_throw(n.at("prog1").get<std::string>());
        d.p2 = parse_program_or_throw(n.at("prog2").get<std::string>());
    } catch (const std::exception& e) {
        fail(c, path, std::string("malformed node: ") + e.what());
        return std::nullopt;
    }
    const int D = c.d1 * c.d2;
    if (d.pre.dim != D || d.post.dim != D) {
        fail(c, path, "predicate dimensions do not match the declared spaces");
        return std::nullopt;
    }

    auto prems = check_premises(n, path, c);

    if (d.rule == "skip") {
        if (expect_arity(c, path, d, prems, 0)) {
            if (d.p1->kind != Program::Kind::skip || d.p2->kind != Program::Kind::skip)
                fail(c, path, "rule (skip) applies to skip ~ skip only");
            else if (!ivp_eq(d.pre, d.post))
                fail(c, path, "rule (skip) needs equal pre- and postconditions: " +
                                  loewner_violation_desc(d.pre, d.post));
        }
    } else if (d.rule == "assign-L") {
        if (expect_arity(c, path, d, prems, 0))
            check_wp_leaf(c, path, d, 1, Program::Kind::init, "an initialization");
    } else if (d.rule == "assign-R") {
        if (expect_arity(c, path, d, prems, 0))
            check_wp_leaf(c, path, d, 2, Program::Kind::init, "an initialization");
    } else if (d.rule == "apply-L") {
        if (expect_arity(c, path, d, prems, 0))
            check_wp_leaf(c, path, d, 1, Program::Kind::unitary, "a unitary application");
    } else if (d.rule == "apply-R") {
        if (expect_arity(c, path, d, prems, 0))
            check_wp_leaf(c, path, d, 2, Program::Kind::unitary, "a unitary application");
    } else if (d.rule == "seq") {
        if (expect_arity(c, path, d, prems, 2)) check_seq_shape(c, path, d, *prems[0], *prems[1]);
    } else if (d.rule == "csq") {
        if (expect_arity(c, path, d, prems, 1)) {
            const NodeData& pr = *prems[0];
            if (!program_equal(d.p1, pr.p1) || !program_equal(d.p2, pr.p2))
                fail(c, path, "rule (csq) must keep the programs");
            else {
                if (!ivp_leq(pr.pre, d.pre, 1e-8))
                    fail(c, path, "precondition weakening violated: " +
                                      loewner_violation_desc(pr.pre, d.pre));
                if (!ivp_leq(d.post, pr.post, 1e-8))
                    fail(c, path, "postcondition strengthening violated: " +
                                      loewner_violation_desc(d.post, pr.post));
            }
        }
    } else if (d.rule == "if-L") {
        check_if_rule(c, path, d, prems, 1);
    } else if (d.rule == "if-R") {
        check_if_rule(c, path, d, prems, 2);
    } else if (d.rule == "while-L") {
        if (expect_arity(c, path, d, prems, 1)) check_while_one_sided(c, path, d, prems, 1);
    } else if (d.rule == "while-R") {
        if (expect_arity(c, path, d, prems, 1)) check_while_one_sided(c, path, d, prems, 2);
    } else if (d.rule == "duality") {
        if (expect_arity(c, path, d, prems, 0)) check_duality(c, path, d, n);
    } else if (d.rule == "if") {
        check_two_sided_if(c, path, d, prems, n);
    } else if (d.rule == "while") {
        if (expect_arity(c, path, d, prems, 1)) check_two_sided_while(c, path, d, prems, n);
    } else if (d.rule == "seq+") {
        if (expect_arity(c, path, d, prems, 2)) check_seq_plus(c, path, d, prems, n);
    } else {
        fail(c, path, "unknown rule '" + d.rule + "'");
    }
    return d;
}

}  // namespace

DerivationReport check_derivation(const nlohmann::json& file) {
    DerivationReport rep;
    DerivCtx c;
    c.rep = &rep;
    c.env = env_from_json(file.at("env"));
    const auto& root = file.at("root");
    if (file.contains("vars1")) {
        c.vars1 = file.at("vars1").get<std::vector<std::string>>();
    } else {
        c.vars1 = program_vars(parse_program_or_throw(root.at("prog1").get<std::string>()));
    }
    if (file.contains("vars2")) {
        c.vars2 = file.at("vars2").get<std::vector<std::string>>();
    } else {
        c.vars2 = program_vars(parse_program_or_throw(root.at("prog2").get<std::string>()));
    }
    for (const auto& v : c.vars1) c.d1 *= c.env.var_dim(v);
    for (const auto& v : c.vars2) c.d2 *= c.env.var_dim(v);
    c.samples = file.value("samples", 64);
    c.pair_samples = file.value("pair_samples", 8);
    c.seed = file.value("seed", static_cast<uint64_t>(0));
    check_node(root, "root", c);
    return rep;
}

}  // namespace qotl
