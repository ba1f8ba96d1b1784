#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "qotl/linalg.hpp"
#include "qotl/qwhile.hpp"
#include "qotl/rng.hpp"

using namespace qotl;
using qotl::testing::qubit_env;
using qotl::testing::random_program;

namespace {

Mat basis_proj(int d, int k) {
    Mat p = Mat::zero(d, d);
    p(k, k) = 1.0;
    return p;
}

Environment one_qubit() {
    Environment env;
    env.vars.emplace_back("q", 2);
    return env;
}

}  // namespace

TEST_CASE("parser handles the statement forms") {
    ProgramPtr s = parse_program_or_throw("skip");
    CHECK(s->kind == Program::Kind::skip);

    ProgramPtr two = parse_program_or_throw("q := |0>; [q] *= U(X)");
    REQUIRE(two->kind == Program::Kind::seq);
    CHECK(two->children[0]->kind == Program::Kind::init);
    CHECK(two->children[0]->vars[0] == "q");
    CHECK(two->children[1]->kind == Program::Kind::unitary);
    CHECK(two->children[1]->name == "X");

    ProgramPtr w = parse_program_or_throw("while M(m01)[q] == 1 do [q] *= U(X) od");
    REQUIRE(w->kind == Program::Kind::whilemeas);
    CHECK(w->name == "m01");
    CHECK(w->children[0]->kind == Program::Kind::unitary);

    // braces around the loop body are accepted too
    ProgramPtr wb = parse_program_or_throw("while M(m01)[q] == 1 do { [q] *= U(X) } od");
    CHECK(program_equal(w, wb));

    ProgramPtr br = parse_program_or_throw(
        "if M(comp)[q] { 0 -> { skip } 1 -> { [q] *= U(X) } }");
    REQUIRE(br->kind == Program::Kind::ifmeas);
    CHECK(br->outcomes == std::vector<int>{0, 1});

    CHECK(parse_program_or_throw("abort")->kind == Program::Kind::abort);
}

TEST_CASE("parser reports line and column") {
    auto r = parse_program("skip;\n[q] = U(X)");
    REQUIRE(std::holds_alternative<ParseError>(r));
    ParseError e = std::get<ParseError>(r);
    CHECK(e.line == 2);
    CHECK(e.col > 0);
    CHECK_FALSE(e.message.empty());

    CHECK(std::holds_alternative<ParseError>(parse_program("q *= U(X)")));  // missing brackets
    CHECK(std::holds_alternative<ParseError>(parse_program("while M(m)[q] == 2 do skip od")));
    CHECK_THROWS_AS(parse_program_or_throw("skip skip"), std::invalid_argument);
    // a trailing separator is fine
    CHECK(parse_program_or_throw("skip; skip;")->kind == Program::Kind::seq);
}

TEST_CASE("printing round-trips through the parser") {
    Rng rng(61);
    std::vector<std::string> vars = {"q0", "q1"};
    for (int t = 0; t < 25; ++t) {
        ProgramPtr p = random_program(rng, vars, 3);
        ProgramPtr q = parse_program_or_throw(program_to_string(p));
        CHECK(program_equal(p, q));
    }
    CHECK(parse_program_or_throw("# comment line\nskip")->kind == Program::Kind::skip);
}

TEST_CASE("environment resolves built-ins and validates user data") {
    Environment env = one_qubit();
    CHECK(approx_equal(env.unitary("X", 2) * env.unitary("X", 2), Mat::identity(2), 1e-12));
    CHECK(approx_equal(env.unitary("H", 2) * dagger(env.unitary("H", 2)), Mat::identity(2), 1e-12));
    CHECK(env.unitary("CNOT", 4).rows == 4);
    auto comp = env.measurement("comp", 2);
    REQUIRE(comp.size() == 2);
    CHECK(approx_equal(dagger(comp[0]) * comp[0] + dagger(comp[1]) * comp[1], Mat::identity(2),
                       1e-12));

    nlohmann::json bad = {{"vars", {{"q", 2}}},
                          {"unitaries",
                           {{"G",
                             {{"rows", 2},
                              {"cols", 2},
                              {"data", {{2.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}}}}}}}};
    CHECK_THROWS_AS(env_from_json(bad), std::invalid_argument);

    Environment round = env_from_json(env_to_json(env));
    CHECK(round.var_dim("q") == 2);
}

TEST_CASE("denotation of the primitive statements") {
    Environment env = one_qubit();

    // statements that touch no variable act on the trivial space
    Denotation bare = denote(parse_program_or_throw("skip"), env);
    CHECK(bare.dim == 1);
    Denotation skip = denote_with_vars(parse_program_or_throw("skip"), env, {"q"});
    CHECK(approx_equal(skip.op.transfer, Mat::identity(4), 1e-12));

    Denotation init = denote(parse_program_or_throw("q := |0>"), env);
    CHECK(approx_equal(superop_apply(init.op, basis_proj(2, 0)), basis_proj(2, 0), 1e-12));
    CHECK(approx_equal(superop_apply(init.op, basis_proj(2, 1)), basis_proj(2, 0), 1e-12));

    Denotation x = denote(parse_program_or_throw("[q] *= U(X)"), env);
    CHECK(approx_equal(superop_apply(x.op, basis_proj(2, 0)), basis_proj(2, 1), 1e-12));

    Denotation ab = denote_with_vars(parse_program_or_throw("abort"), env, {"q"});
    CHECK(max_abs(superop_apply(ab.op, Mat::identity(2))) < 1e-12);
}

TEST_CASE("measuring loop resets the qubit") {
    Environment env = one_qubit();
    ProgramPtr w = parse_program_or_throw("while M(comp)[q] == 1 do [q] *= U(X) od");
    Denotation d = denote(w, env);
    CHECK(d.loops_converged);
    CHECK(d.loop_iterations <= 3);
    CHECK(approx_equal(superop_apply(d.op, basis_proj(2, 1)), basis_proj(2, 0), 1e-9));
    CHECK(approx_equal(superop_apply(d.op, basis_proj(2, 0)), basis_proj(2, 0), 1e-9));
    CHECK(is_ast(d.op));
}

TEST_CASE("sequencing is composition") {
    Environment env = qubit_env(2);
    Rng rng(62);
    for (int t = 0; t < 10; ++t) {
        ProgramPtr a = random_program(rng, {"q0", "q1"}, 2);
        ProgramPtr b = random_program(rng, {"q0", "q1"}, 2);
        Denotation da = denote_with_vars(a, env, {"q0", "q1"});
        Denotation db = denote_with_vars(b, env, {"q0", "q1"});
        Denotation dab = denote_with_vars(prog_seq(a, b), env, {"q0", "q1"});
        CHECK(approx_equal(dab.op.transfer, superop_compose(db.op, da.op).transfer, 1e-9));
        Mat rho = rng.random_density(4);
        CHECK(approx_equal(superop_apply(dab.op, rho),
                           superop_apply(db.op, superop_apply(da.op, rho)), 1e-9));
    }
}

TEST_CASE("random programs denote to channels") {
    Environment env = qubit_env(2);
    Rng rng(63);
    for (int t = 0; t < 20; ++t) {
        ProgramPtr p = random_program(rng, {"q0", "q1"}, 4);
        Denotation d = denote_with_vars(p, env, {"q0", "q1"});
        REQUIRE(d.loops_converged);
        CHECK(is_cp(d.op));
        CHECK(is_trace_nonincreasing(d.op));
        CHECK(lambda_min(choi_matrix(d.op)) >= -1e-8 * (1.0 + lambda_max(choi_matrix(d.op))));
        Mat rho = rng.random_density(4);
        Mat out = superop_apply(d.op, rho);
        CHECK(trace(out).real() <= trace(rho).real() + 1e-8);
        CHECK(is_hermitian(out, 1e-9));
    }
}

TEST_CASE("dual map satisfies the trace identity") {
    Environment env = qubit_env(2);
    Rng rng(64);

    Superoperator id2 = superop_identity(2);
    CHECK(approx_equal(superop_dual(id2).transfer, id2.transfer, 1e-12));

    Mat u = env.unitary("H", 2);
    Superoperator uch = superop_from_kraus({u});
    Mat q = rng.random_herm(2);
    CHECK(approx_equal(superop_dual_apply(uch, q), dagger(u) * q * u, 1e-12));

    for (int t = 0; t < 10; ++t) {
        ProgramPtr p = random_program(rng, {"q0", "q1"}, 3);
        Denotation d = denote_with_vars(p, env, {"q0", "q1"});
        Mat a = rng.random_herm(4), b = rng.random_herm(4);
        cx lhs = trace_prod(a, superop_apply(d.op, b));
        cx rhs = trace_prod(superop_dual_apply(d.op, a), b);
        CHECK(std::abs(lhs - rhs) < 1e-8 * (1.0 + std::abs(lhs)));
    }
}

TEST_CASE("almost sure termination classification") {
    Environment env = one_qubit();
    CHECK(is_ast(denote_with_vars(parse_program_or_throw("skip"), env, {"q"}).op));
    CHECK_FALSE(is_ast(denote_with_vars(parse_program_or_throw("abort"), env, {"q"}).op));
    // the dual of abort annihilates I
    Superoperator ab = denote_with_vars(parse_program_or_throw("abort"), env, {"q"}).op;
    CHECK(max_abs(superop_dual_apply(ab, Mat::identity(2))) < 1e-12);

    // guard never flips: stuck on |1>
    Denotation stuck = denote(parse_program_or_throw("while M(comp)[q] == 1 do skip od"), env);
    CHECK(stuck.loops_converged);
    CHECK_FALSE(is_ast(stuck.op));
    CHECK(max_abs(superop_apply(stuck.op, basis_proj(2, 1))) < 1e-9);
    CHECK(approx_equal(superop_apply(stuck.op, basis_proj(2, 0)), basis_proj(2, 0), 1e-9));
}

TEST_CASE("loop iterates increase in trace") {
    // while^(k) via explicit unrolling: while^(0) = abort,
    // while^(k+1) = if M { 0 -> skip, 1 -> body; while^(k) }.
    Environment env = one_qubit();
    ProgramPtr body = prog_unitary({"q"}, "H");
    ProgramPtr unrolled = prog_abort();
    Rng rng(65);
    Mat rho = rng.random_density(2);
    double prev = -1.0;
    for (int k = 0; k < 8; ++k) {
        unrolled = prog_if({"q"}, "comp", {0, 1}, {prog_skip(), prog_seq(body, unrolled)});
        double tr = trace(superop_apply(denote(unrolled, env).op, rho)).real();
        CHECK(tr >= prev - 1e-12);
        prev = tr;
    }
    // and the fixpoint dominates every finite unrolling
    ProgramPtr loop = prog_while({"q"}, "comp", body);
    double fix = trace(superop_apply(denote(loop, env).op, rho)).real();
    CHECK(fix >= prev - 1e-9);
}

TEST_CASE("non-convergent loops surface their status") {
    // half-strength measurement: the iterates approach the identity channel
    // geometrically, so a tiny iteration cap leaves a visible residual
    Environment env = one_qubit();
    Mat half = (1.0 / std::sqrt(2.0)) * Mat::identity(2);
    env.measurements["half"] = {half, half};
    ProgramPtr w = parse_program_or_throw("while M(half)[q] == 1 do skip od");

    DenoteOptions tight;
    tight.loop_max_iter = 3;
    Denotation d = denote(w, env, tight);
    CHECK_FALSE(d.loops_converged);
    CHECK(d.loop_residual > 1e-3);

    Denotation full = denote(w, env);
    CHECK(full.loops_converged);
    CHECK(is_ast(full.op));
}

TEST_CASE("denote validates structure") {
    Environment env = one_qubit();
    CHECK_THROWS_AS(denote(parse_program_or_throw("[r] *= U(X)"), env), std::invalid_argument);
    CHECK_THROWS_AS(denote(parse_program_or_throw("[q] *= U(NOPE)"), env), std::invalid_argument);
    // if-branches must cover the outcome set
    ProgramPtr partial = prog_if({"q"}, "comp", {0}, {prog_skip()});
    CHECK_THROWS_AS(denote(partial, env), std::invalid_argument);
    // while guards must be two-outcome
    Environment trit;
    trit.vars.emplace_back("t", 3);
    CHECK_THROWS_AS(denote(parse_program_or_throw("while M(comp)[t] == 1 do skip od"), trit),
                    std::invalid_argument);
    // dimension cap
    Environment big;
    for (int i = 0; i < 9; ++i) big.vars.emplace_back("q" + std::to_string(i), 2);
    ProgramPtr touch_all = prog_skip();
    for (int i = 0; i < 9; ++i)
        touch_all = prog_seq(touch_all, prog_init("q" + std::to_string(i)));
    CHECK_THROWS_AS(denote(touch_all, big), std::invalid_argument);
}

TEST_CASE("choi and kraus views agree with the transfer matrix") {
    Environment env = qubit_env(2);
    Rng rng(66);
    for (int t = 0; t < 10; ++t) {
        ProgramPtr p = random_program(rng, {"q0", "q1"}, 3);
        Superoperator e = denote_with_vars(p, env, {"q0", "q1"}).op;
        Mat choi = choi_matrix(e);
        Superoperator back = superop_from_choi(choi, e.in_dim, e.out_dim);
        CHECK(approx_equal(back.transfer, e.transfer, 1e-9));
        auto kraus = kraus_from_choi(choi, e.in_dim, e.out_dim);
        Superoperator rebuilt = superop_from_kraus(kraus);
        CHECK(approx_equal(rebuilt.transfer, e.transfer, 1e-8));
    }
}

TEST_CASE("dual application on infinite-valued predicates") {
    Environment env = one_qubit();
    Rng rng(67);

    Superoperator id2 = superop_identity(2);
    IVPredicate a = ivp_new(rng.random_psd(2), basis_proj(2, 0));
    IVPredicate same = dual_apply_ivp(id2, a);
    CHECK(approx_equal(same.finite, a.finite, 1e-10));
    CHECK(approx_equal(same.inf_proj, a.inf_proj, 1e-10));

    Mat u = env.unitary("H", 2);
    Superoperator uch = superop_from_kraus({u});
    IVPredicate q = ivp_from_matrix(rng.random_psd(2));
    CHECK(approx_equal(dual_apply_ivp(uch, q).finite, dagger(u) * q.finite * u, 1e-10));

    // extended trace identity tr(E^dag(A) rho) = tr(A E(rho))
    for (int t = 0; t < 20; ++t) {
        ProgramPtr p = random_program(rng, {"q0", "q1"}, 3);
        Superoperator e = denote_with_vars(p, qubit_env(2), {"q0", "q1"}).op;
        IVPredicate pred = ivp_new(rng.random_psd(4), rng.random_projector(4, rng.uniform_int(0, 2)));
        Mat rho = rng.random_density(4);
        ExtReal lhs = ivp_trace(dual_apply_ivp(e, pred), rho);
        ExtReal rhs = ivp_trace(pred, superop_apply(e, rho));
        if (lhs.is_inf() || rhs.is_inf())
            CHECK(lhs.is_inf() == rhs.is_inf());
        else
            CHECK(std::abs(lhs.value() - rhs.value()) < 1e-8 * (1.0 + std::abs(rhs.value())));
    }
}

TEST_CASE("superoperator tensor respects products") {
    Rng rng(68);
    Environment env = one_qubit();
    Mat x = env.unitary("X", 2);
    Superoperator ex = superop_from_kraus({x});
    Superoperator id = superop_identity(2);
    Superoperator both = superop_tensor(ex, id);
    Mat rho = rng.random_density(4);
    Mat expect = kron(x, Mat::identity(2)) * rho * dagger(kron(x, Mat::identity(2)));
    CHECK(approx_equal(superop_apply(both, rho), expect, 1e-12));
}

TEST_CASE("embedding pads operators with identities") {
    Environment env = qubit_env(2);
    Mat x = env.unitary("X", 2);
    Mat onto_first = embed_operator(x, {"q0"}, env, {"q0", "q1"});
    CHECK(approx_equal(onto_first, kron(x, Mat::identity(2)), 1e-12));
    Mat onto_second = embed_operator(x, {"q1"}, env, {"q0", "q1"});
    CHECK(approx_equal(onto_second, kron(Mat::identity(2), x), 1e-12));
    // listed order maps operator factors onto the right slots
    Mat cnot = env.unitary("CNOT", 4);
    Mat flipped = embed_operator(cnot, {"q1", "q0"}, env, {"q0", "q1"});
    Mat sw = swap_operator(2);
    CHECK(approx_equal(flipped, sw * cnot * sw, 1e-12));
}

TEST_CASE("denote_with_vars pads unused variables") {
    Environment env = qubit_env(2);
    ProgramPtr p = parse_program_or_throw("[q0] *= U(X)");
    Denotation d = denote_with_vars(p, env, {"q0", "q1"});
    CHECK(d.dim == 4);
    Mat x = env.unitary("X", 2);
    Superoperator expect = superop_from_kraus({kron(x, Mat::identity(2))});
    CHECK(approx_equal(d.op.transfer, expect.transfer, 1e-12));
    CHECK(d.var_order == std::vector<std::string>{"q0", "q1"});
}
