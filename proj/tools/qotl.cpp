// qotl: command-line front end for the relational verification toolkit.
//
// Subcommands parse environments, programs, and judgments, dispatch the
// corresponding checker, and emit a machine-readable JSON report (or a short
// text summary with --format text).
//
// Exit codes: 0 property holds / Valid, 1 Invalid / Falsified, 2 Unknown,
// 3 input or solver error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qotl/applications.hpp"
#include "qotl/json_io.hpp"

using nlohmann::ordered_json;
using namespace qotl;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 0;
    double tol_psd = 1e-9;
    double tol_gap = 1e-8;
    int max_iter = 200;
    int restarts = 32;
    int threads = 1;
    std::string out_path;
    std::string dump_sdp;
    std::string format = "json";
};

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ProgramPtr read_program_file(const std::string& path) {
    try {
        return parse_program_or_throw(read_text_file(path));
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

SdpOptions sdp_opts(const GlobalOpts& g) {
    SdpOptions o;
    o.gap_tol = g.tol_gap;
    o.max_iter = g.max_iter;
    o.dump_path = g.dump_sdp;
    return o;
}

CheckBudget budget_from(const GlobalOpts& g, const nlohmann::json& params) {
    CheckBudget b;
    b.restarts = g.restarts;
    b.seed = g.seed;
    if (params.is_object()) {
        b.sweeps = params.value("sweeps", b.sweeps);
        b.family_samples = params.value("family_samples", b.family_samples);
        b.ascent_steps = params.value("ascent_steps", b.ascent_steps);
    }
    return b;
}

ordered_json config_json(const GlobalOpts& g) {
    ordered_json c;
    c["seed"] = g.seed;
    c["tol_psd"] = g.tol_psd;
    c["tol_gap"] = g.tol_gap;
    c["max_iter"] = g.max_iter;
    c["restarts"] = g.restarts;
    c["threads"] = g.threads;
    return c;
}

ordered_json verdict_json(const Verdict& v) {
    ordered_json j;
    j["status"] = status_name(v.status);
    j["sampled"] = v.sampled;
    j["reason"] = v.reason;
    j["margin"] = v.margin;
    j["falsifier_best"] = v.falsifier_best;
    j["certificate_best"] = v.certificate_best;
    j["counterexample"] = v.counterexample ? ordered_json(mat_to_json(*v.counterexample))
                                           : ordered_json(nullptr);
    return j;
}

int verdict_exit(const Verdict& v) {
    switch (v.status) {
        case Status::valid: return 0;
        case Status::invalid: return 1;
        case Status::unknown: return 2;
    }
    return 2;
}

std::string render_text(const ordered_json& report) {
    std::ostringstream os;
    for (const auto& [k, v] : report.items()) {
        if (v.is_object() && v.contains("rows") && v.contains("cols"))
            os << k << ": <" << v["rows"] << "x" << v["cols"] << " matrix>\n";
        else
            os << k << ": " << v.dump() << "\n";
    }
    return os.str();
}

void emit(const ordered_json& report, const GlobalOpts& g) {
    const std::string payload =
        g.format == "text" ? render_text(report) : report.dump(2) + "\n";
    if (g.out_path.empty()) {
        std::cout << payload;
    } else {
        std::ofstream f(g.out_path);
        if (!f) throw std::invalid_argument("cannot write '" + g.out_path + "'");
        f << payload;
    }
}

struct JudgmentFile {
    Environment env;
    std::vector<std::string> vars1, vars2;
    ProgramPtr p1, p2;
    IVPredicate pre, post;
    bool has_pre = false;
    nlohmann::json params;
};

JudgmentFile read_judgment(const std::string& path) {
    const nlohmann::json j = read_json_file(path);
    JudgmentFile f;
    try {
        f.env = env_from_json(j.at("env"));
        f.p1 = parse_program_or_throw(j.at("prog1").get<std::string>());
        f.p2 = parse_program_or_throw(j.at("prog2").get<std::string>());
        f.vars1 = j.value("vars1", std::vector<std::string>{});
        f.vars2 = j.value("vars2", std::vector<std::string>{});
        if (j.contains("pre")) {
            f.pre = ivp_from_json(j.at("pre"));
            f.has_pre = true;
        }
        f.post = ivp_from_json(j.at("post"));
        f.params = j.value("params", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
    return f;
}

ordered_json certificate_json(const TransportCertificate& c) {
    ordered_json j;
    j["partial"] = c.partial;
    j["y1"] = c.y1;
    j["y2"] = c.y2;
    j["big_y1"] = ordered_json(mat_to_json(c.big_y1));
    j["big_y2"] = ordered_json(mat_to_json(c.big_y2));
    return j;
}

TransportMode parse_mode(const std::string& m) {
    if (m == "exact") return TransportMode::exact;
    if (m == "partial") return TransportMode::partial;
    throw std::invalid_argument("mode must be 'exact' or 'partial'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"relational verification toolkit for quantum while-programs"};
    app.require_subcommand(1);
    // Accept the global options after the subcommand name as well.
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--seed", g.seed, "random seed (default 0)");
    app.add_option("--tol-psd", g.tol_psd, "PSD tolerance for input states");
    app.add_option("--tol-gap", g.tol_gap, "solver duality-gap tolerance");
    app.add_option("--max-iter", g.max_iter, "solver iteration cap");
    app.add_option("--restarts", g.restarts, "falsifier restarts");
    app.add_option("--threads", g.threads, "worker cap (reserved)");
    app.add_option("--out", g.out_path, "write the report to this file instead of stdout");
    app.add_option("--dump-sdp", g.dump_sdp, "append the solver debug dump of every SDP here");
    app.add_option("--format", g.format, "report format: json or text")
        ->check(CLI::IsMember({"json", "text"}));

    std::string judgment_path, derivation_path, cost_path, rho1_path, rho2_path;
    std::string env_path, p1_path, p2_path, prog_path, system_path;
    std::string mode = "exact";
    double eps = 0.0, delta = 0.0, lambda = 1.0;
    bool with_encoding_bound = false;
    int max_len = 3;
    std::vector<std::string> vars1, vars2, g1, g2, cmds;

    auto* c_wp = app.add_subcommand("wp", "two-sided weakest precondition of a judgment file");
    c_wp->add_option("--judgment", judgment_path)->required();

    auto* c_split = app.add_subcommand("check-split", "exact validity for tensor-sum postconditions");
    c_split->add_option("--judgment", judgment_path)->required();

    auto* c_check = app.add_subcommand("check", "validity for bounded postconditions");
    c_check->add_option("--judgment", judgment_path)->required();

    auto* c_derive = app.add_subcommand("derive-check", "replay a derivation tree");
    c_derive->add_option("--derivation", derivation_path)->required();

    auto* c_transport = app.add_subcommand("transport", "optimal transport value of a cost");
    c_transport->add_option("--cost", cost_path, "cost predicate (JSON)")->required();
    c_transport->add_option("--rho1", rho1_path)->required();
    c_transport->add_option("--rho2", rho2_path)->required();
    c_transport->add_option("--mode", mode, "exact or partial");

    auto* c_lift = app.add_subcommand("lift", "lifting with defects / dual certificate");
    c_lift->add_option("--cost", cost_path, "Hermitian cost matrix (JSON)")->required();
    c_lift->add_option("--rho1", rho1_path)->required();
    c_lift->add_option("--rho2", rho2_path)->required();
    c_lift->add_option("--eps", eps, "defect bound")->required();
    c_lift->add_option("--mode", mode, "exact or partial");

    auto* c_equiv = app.add_subcommand("equiv", "program equivalence");
    c_equiv->add_option("--env", env_path)->required();
    c_equiv->add_option("--p1", p1_path)->required();
    c_equiv->add_option("--p2", p2_path)->required();
    c_equiv->add_option("--vars1", vars1);
    c_equiv->add_option("--vars2", vars2);

    auto* c_td = app.add_subcommand("trace-distance", "trace distance of two states");
    c_td->add_option("--rho1", rho1_path)->required();
    c_td->add_option("--rho2", rho2_path)->required();

    auto* c_diamond = app.add_subcommand("diamond", "diamond distance of two programs");
    c_diamond->add_option("--env", env_path)->required();
    c_diamond->add_option("--p1", p1_path)->required();
    c_diamond->add_option("--p2", p2_path)->required();
    c_diamond->add_flag("--encoding-bound", with_encoding_bound,
                        "also report the judgment-route lower bound");
    c_diamond->add_option("--vars1", vars1);
    c_diamond->add_option("--vars2", vars2);

    auto* c_wass = app.add_subcommand("wasserstein", "Wasserstein Lipschitz continuity");
    c_wass->add_option("--env", env_path)->required();
    c_wass->add_option("--p1", p1_path)->required();
    c_wass->add_option("--p2", p2_path)->required();
    c_wass->add_option("--lambda", lambda, "Lipschitz constant")->required();
    c_wass->add_option("--vars1", vars1);
    c_wass->add_option("--vars2", vars2);

    auto* c_ni = app.add_subcommand("noninterference", "quantum non-interference");
    c_ni->add_option("--system", system_path, "quantum system (JSON)")->required();
    c_ni->add_option("--g1", g1, "acting agent group")->required();
    c_ni->add_option("--g2", g2, "observing agent group")->required();
    c_ni->add_option("--d", cmds, "command set to purge");
    c_ni->add_option("--max-len", max_len, "maximum action-sequence length");

    auto* c_dp = app.add_subcommand("dp", "quantum differential privacy");
    c_dp->add_option("--env", env_path)->required();
    c_dp->add_option("--prog", prog_path)->required();
    c_dp->add_option("--eps", eps)->required();
    c_dp->add_option("--delta", delta)->required();
    c_dp->add_option("--vars", vars1, "qubit variables (default: program order)");

    auto* c_ast = app.add_subcommand("ast-check", "almost-sure termination of a program");
    c_ast->add_option("--env", env_path)->required();
    c_ast->add_option("--prog", prog_path)->required();
    c_ast->add_option("--vars", vars1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 3;
    }

    try {
        if (*c_wp) {
            JudgmentFile f = read_judgment(judgment_path);
            WpResult r = wp_two_sided(f.p1, f.p2, f.post, f.env, f.vars1, f.vars2);
            ordered_json rep;
            rep["wp"] = ordered_json(ivp_to_json(r.wp));
            rep["ast1"] = r.ast1;
            rep["ast2"] = r.ast2;
            rep["config"] = config_json(g);
            emit(rep, g);
            return 0;
        }
        if (*c_split) {
            JudgmentFile f = read_judgment(judgment_path);
            if (!f.has_pre) throw std::invalid_argument("check-split: judgment needs a 'pre'");
            PairSemantics sem = pair_semantics(f.p1, f.p2, f.env, f.vars1, f.vars2);
            Mat q1, q2;
            if (f.params.contains("q1") && f.params.contains("q2")) {
                q1 = mat_from_json(f.params.at("q1"));
                q2 = mat_from_json(f.params.at("q2"));
            } else {
                if (max_abs(f.post.inf_proj) > 0.5)
                    throw std::invalid_argument(
                        "check-split: postcondition must be finite (bounded)");
                auto sp = detect_split(f.post.finite, sem.dim1, sem.dim2);
                if (!sp)
                    throw std::invalid_argument(
                        "check-split: postcondition is not a tensor sum Q1 (x) I + I (x) Q2");
                q1 = sp->first;
                q2 = sp->second;
            }
            Verdict v = split_valid_core(f.pre, sem, q1, q2);
            ordered_json rep = verdict_json(v);
            rep["q1"] = ordered_json(mat_to_json(q1));
            rep["q2"] = ordered_json(mat_to_json(q2));
            rep["config"] = config_json(g);
            emit(rep, g);
            return verdict_exit(v);
        }
        if (*c_check) {
            JudgmentFile f = read_judgment(judgment_path);
            if (!f.has_pre) throw std::invalid_argument("check: judgment needs a 'pre'");
            if (max_abs(f.post.inf_proj) > 0.5)
                throw std::invalid_argument("check: postcondition must be finite (bounded)");
            Verdict v = check_valid_general(f.pre, f.p1, f.p2, f.post.finite, f.env,
                                            budget_from(g, f.params), f.vars1, f.vars2);
            ordered_json rep = verdict_json(v);
            rep["config"] = config_json(g);
            emit(rep, g);
            return verdict_exit(v);
        }
        if (*c_derive) {
            DerivationReport r = check_derivation(read_json_file(derivation_path));
            ordered_json rep;
            rep["ok"] = r.ok;
            rep["sampled"] = r.sampled;
            rep["nodes_checked"] = r.nodes_checked;
            rep["failures"] = r.failures;
            rep["config"] = config_json(g);
            emit(rep, g);
            return r.ok ? 0 : 1;
        }
        if (*c_transport) {
            IVPredicate cost = ivp_from_json(read_json_file(cost_path));
            DensityOperator r1 = DensityOperator::make(mat_from_json(read_json_file(rho1_path)),
                                                       g.tol_psd);
            DensityOperator r2 = DensityOperator::make(mat_from_json(read_json_file(rho2_path)),
                                                       g.tol_psd);
            TransportOptions topts{sdp_opts(g)};
            topts.complete_dual = true;
            TransportResult r = transport_value(cost, r1, r2, parse_mode(mode), topts);
            ordered_json rep;
            rep["value"] = r.value.is_inf() ? ordered_json("inf") : ordered_json(r.value.value());
            rep["holds"] = !r.value.is_inf();
            rep["witness"] = r.witness ? ordered_json(mat_to_json(*r.witness))
                                       : ordered_json(nullptr);
            rep["certificate"] = r.dual_certificate ? certificate_json(*r.dual_certificate)
                                                    : ordered_json(nullptr);
            rep["gap"] = r.gap;
            rep["config"] = config_json(g);
            emit(rep, g);
            return r.value.is_inf() ? 1 : 0;
        }
        if (*c_lift) {
            DensityOperator r1 = DensityOperator::make(mat_from_json(read_json_file(rho1_path)),
                                                       g.tol_psd);
            DensityOperator r2 = DensityOperator::make(mat_from_json(read_json_file(rho2_path)),
                                                       g.tol_psd);
            HermitianOperator cost = HermitianOperator::make(mat_from_json(read_json_file(cost_path)));
            TransportOptions topts{sdp_opts(g)};
            LiftingResult r = parse_mode(mode) == TransportMode::exact
                                  ? lifting_check(r1, cost, ExtReal::finite(eps), r2, topts)
                                  : partial_strassen_check(r1, r2, cost, ExtReal::finite(eps), topts);
            ordered_json rep;
            rep["holds"] = r.holds;
            rep["value"] = r.value.is_inf() ? ordered_json("inf") : ordered_json(r.value.value());
            rep["witness"] = r.witness ? ordered_json(mat_to_json(*r.witness))
                                       : ordered_json(nullptr);
            rep["certificate"] = r.certificate ? certificate_json(*r.certificate)
                                               : ordered_json(nullptr);
            rep["gap"] = r.gap;
            rep["config"] = config_json(g);
            emit(rep, g);
            return r.holds ? 0 : 1;
        }
        if (*c_equiv) {
            Environment env = env_from_json(read_json_file(env_path));
            CheckBudget b = budget_from(g, {});
            EquivResult r = program_equiv(read_program_file(p1_path), read_program_file(p2_path),
                                          env, b, vars1, vars2);
            ordered_json rep;
            rep["equal"] = r.equal;
            rep["choi_gap"] = r.choi_gap;
            rep["witness"] = r.witness_state ? ordered_json(mat_to_json(*r.witness_state))
                                             : ordered_json(nullptr);
            rep["witness_ts"] = r.witness_ts;
            rep["mono_worst"] = r.mono_worst;
            rep["family_samples"] = r.family_samples;
            rep["family_failures"] = r.family_failures;
            rep["config"] = config_json(g);
            emit(rep, g);
            return r.equal ? 0 : 1;
        }
        if (*c_td) {
            DensityOperator r1 = DensityOperator::make(mat_from_json(read_json_file(rho1_path)),
                                                       g.tol_psd);
            DensityOperator r2 = DensityOperator::make(mat_from_json(read_json_file(rho2_path)),
                                                       g.tol_psd);
            ordered_json rep;
            rep["value"] = trace_distance(r1, r2);
            rep["variational"] = trace_distance_variational(r1, r2);
            rep["config"] = config_json(g);
            emit(rep, g);
            return 0;
        }
        if (*c_diamond) {
            Environment env = env_from_json(read_json_file(env_path));
            ProgramPtr p1 = read_program_file(p1_path), p2 = read_program_file(p2_path);
            PairSemantics sem = pair_semantics(p1, p2, env, vars1, vars2);
            const double value = diamond_distance(sem.den1.op, sem.den2.op, sdp_opts(g));
            ordered_json rep;
            rep["value"] = value;
            if (with_encoding_bound) {
                CheckBudget b = budget_from(g, {});
                b.sweeps = 60;
                rep["encoding_bound"] = diamond_encoding_bound(p1, p2, env, b, vars1, vars2);
            } else {
                rep["encoding_bound"] = nullptr;
            }
            rep["config"] = config_json(g);
            emit(rep, g);
            return 0;
        }
        if (*c_wass) {
            Environment env = env_from_json(read_json_file(env_path));
            Verdict v = wasserstein_lipschitz_check(read_program_file(p1_path),
                                                    read_program_file(p2_path), lambda, env,
                                                    budget_from(g, {}), vars1, vars2);
            ordered_json rep = verdict_json(v);
            rep["config"] = config_json(g);
            emit(rep, g);
            return verdict_exit(v);
        }
        if (*c_ni) {
            QuantumSystemSpec spec = qsys_from_json(read_json_file(system_path));
            NonInterferenceResult r = non_interference_check(spec, g1, g2, cmds, max_len);
            ordered_json rep;
            rep["interference_free"] = r.interference_free;
            if (r.witness) {
                ordered_json w;
                w["alpha"] = r.witness->alpha;
                w["agent"] = r.witness->agent;
                w["povm_index"] = r.witness->povm_index;
                w["distance"] = r.witness->distance;
                rep["witness"] = w;
            } else {
                rep["witness"] = nullptr;
            }
            rep["sequences_checked"] = r.sequences_checked;
            rep["config"] = config_json(g);
            emit(rep, g);
            return r.interference_free ? 0 : 1;
        }
        if (*c_dp) {
            Environment env = env_from_json(read_json_file(env_path));
            Verdict v = dp_check(read_program_file(prog_path), env, vars1, eps, delta,
                                 budget_from(g, {}));
            ordered_json rep = verdict_json(v);
            rep["config"] = config_json(g);
            emit(rep, g);
            return verdict_exit(v);
        }
        if (*c_ast) {
            Environment env = env_from_json(read_json_file(env_path));
            ProgramPtr p = read_program_file(prog_path);
            Denotation den = denote_with_vars(p, env, vars1.empty() ? program_vars(p) : vars1);
            const bool ast = is_ast(den.op) && den.loops_converged;
            ordered_json rep;
            rep["ast"] = ast;
            rep["loops_converged"] = den.loops_converged;
            rep["loop_residual"] = den.loop_residual;
            rep["dim"] = den.dim;
            rep["config"] = config_json(g);
            emit(rep, g);
            return ast ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 3;
}
