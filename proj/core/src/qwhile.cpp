#include "qotl/qwhile.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qotl/json_io.hpp"

namespace qotl {

ProgramPtr prog_skip() {
    auto p = std::make_shared<Program>();
    p->kind = Program::Kind::skip;
    return p;
}

ProgramPtr prog_abort() {
    auto p = std::make_shared<Program>();
    p->kind = Program::Kind::abort;
    return p;
}

ProgramPtr prog_init(const std::string& var) {
    auto p = std::make_shared<Program>();
    p->kind = Program::Kind::init;
    p->vars = {var};
    return p;
}

ProgramPtr prog_unitary(const std::vector<std::string>& vars, const std::string& name) {
    auto p = std::make_shared<Program>();
    p->kind = Program::Kind::unitary;
    p->vars = vars;
    p->name = name;
    return p;
}

ProgramPtr prog_if(const std::vector<std::string>& vars, const std::string& name,
                   std::vector<int> outcomes, std::vector<ProgramPtr> branches) {
    auto p = std::make_shared<Program>();
    p->kind = Program::Kind::ifmeas;
    p->vars = vars;
    p->name = name;
    p->outcomes = std::move(outcomes);
    p->children = std::move(branches);
    return p;
}

ProgramPtr prog_while(const std::vector<std::string>& vars, const std::string& name,
                      ProgramPtr body) {
    auto p = std::make_shared<Program>();
    p->kind = Program::Kind::whilemeas;
    p->vars = vars;
    p->name = name;
    p->children = {std::move(body)};
    return p;
}

ProgramPtr prog_seq(ProgramPtr a, ProgramPtr b) {
    auto p = std::make_shared<Program>();
    p->kind = Program::Kind::seq;
    p->children = {std::move(a), std::move(b)};
    return p;
}

namespace {

void collect_vars(const ProgramPtr& p, std::vector<std::string>& order) {
    auto add = [&order](const std::string& v) {
        if (std::find(order.begin(), order.end(), v) == order.end()) order.push_back(v);
    };
    switch (p->kind) {
        case Program::Kind::skip:
        case Program::Kind::abort:
            break;
        case Program::Kind::init:
        case Program::Kind::unitary:
        case Program::Kind::ifmeas:
        case Program::Kind::whilemeas:
            for (const auto& v : p->vars) add(v);
            break;
        case Program::Kind::seq:
            break;
    }
    for (const auto& c : p->children) collect_vars(c, order);
}

std::string join_vars(const std::vector<std::string>& vs) {
    std::string s;
    for (size_t i = 0; i < vs.size(); ++i) {
        if (i) s += ",";
        s += vs[i];
    }
    return s;
}

}  // namespace

std::vector<std::string> program_vars(const ProgramPtr& p) {
    std::vector<std::string> order;
    collect_vars(p, order);
    return order;
}

bool program_equal(const ProgramPtr& a, const ProgramPtr& b) {
    if (a->kind != b->kind || a->vars != b->vars || a->name != b->name ||
        a->outcomes != b->outcomes || a->children.size() != b->children.size())
        return false;
    for (size_t i = 0; i < a->children.size(); ++i)
        if (!program_equal(a->children[i], b->children[i])) return false;
    return true;
}

std::string program_to_string(const ProgramPtr& p) {
    switch (p->kind) {
        case Program::Kind::skip: return "skip";
        case Program::Kind::abort: return "abort";
        case Program::Kind::init: return p->vars[0] + " := |0>";
        case Program::Kind::unitary:
            return "[" + join_vars(p->vars) + "] *= U(" + p->name + ")";
        case Program::Kind::ifmeas: {
            std::string s = "if M(" + p->name + ")[" + join_vars(p->vars) + "] { ";
            for (size_t i = 0; i < p->children.size(); ++i)
                s += std::to_string(p->outcomes[i]) + " -> { " +
                     program_to_string(p->children[i]) + " } ";
            return s + "}";
        }
        case Program::Kind::whilemeas:
            return "while M(" + p->name + ")[" + join_vars(p->vars) + "] == 1 do { " +
                   program_to_string(p->children[0]) + " } od";
        case Program::Kind::seq:
            return program_to_string(p->children[0]) + "; " + program_to_string(p->children[1]);
    }
    return "";
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

struct Token {
    enum class Kind { ident, integer, ket0, assign, star_eq, arrow, eq_eq, semi, comma,
                      lbracket, rbracket, lbrace, rbrace, lparen, rparen, eof };
    Kind kind;
    std::string text;
    int line;
    int col;
};

struct Lexer {
    const std::string& src;
    size_t pos = 0;
    int line = 1;
    int col = 1;
    std::optional<ParseError> error;

    explicit Lexer(const std::string& s) : src(s) {}

    void advance(size_t n) {
        for (size_t i = 0; i < n && pos < src.size(); ++i, ++pos) {
            if (src[pos] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    }

    std::vector<Token> run() {
        std::vector<Token> out;
        while (pos < src.size()) {
            const char c = src[pos];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance(1);
                continue;
            }
            if (c == '#') {  // line comment
                while (pos < src.size() && src[pos] != '\n') advance(1);
                continue;
            }
            const int tl = line, tc = col;
            auto two = pos + 1 < src.size() ? src.substr(pos, 2) : "";
            if (src.compare(pos, 3, "|0>") == 0) {
                out.push_back({Token::Kind::ket0, "|0>", tl, tc});
                advance(3);
                continue;
            }
            if (two == ":=") { out.push_back({Token::Kind::assign, two, tl, tc}); advance(2); continue; }
            if (two == "*=") { out.push_back({Token::Kind::star_eq, two, tl, tc}); advance(2); continue; }
            if (two == "->") { out.push_back({Token::Kind::arrow, two, tl, tc}); advance(2); continue; }
            if (two == "==") { out.push_back({Token::Kind::eq_eq, two, tl, tc}); advance(2); continue; }
            switch (c) {
                case ';': out.push_back({Token::Kind::semi, ";", tl, tc}); advance(1); continue;
                case ',': out.push_back({Token::Kind::comma, ",", tl, tc}); advance(1); continue;
                case '[': out.push_back({Token::Kind::lbracket, "[", tl, tc}); advance(1); continue;
                case ']': out.push_back({Token::Kind::rbracket, "]", tl, tc}); advance(1); continue;
                case '{': out.push_back({Token::Kind::lbrace, "{", tl, tc}); advance(1); continue;
                case '}': out.push_back({Token::Kind::rbrace, "}", tl, tc}); advance(1); continue;
                case '(': out.push_back({Token::Kind::lparen, "(", tl, tc}); advance(1); continue;
                case ')': out.push_back({Token::Kind::rparen, ")", tl, tc}); advance(1); continue;
                default: break;
            }
            if (std::isdigit(static_cast<unsigned char>(c))) {
                std::string t;
                while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) {
                    t += src[pos];
                    advance(1);
                }
                out.push_back({Token::Kind::integer, t, tl, tc});
                continue;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::string t;
                while (pos < src.size() &&
                       (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_')) {
                    t += src[pos];
                    advance(1);
                }
                out.push_back({Token::Kind::ident, t, tl, tc});
                continue;
            }
            error = ParseError{std::string("unexpected character '") + c + "'", tl, tc};
            return out;
        }
        out.push_back({Token::Kind::eof, "", line, col});
        return out;
    }
};

struct Parser {
    std::vector<Token> toks;
    size_t pos = 0;
    std::optional<ParseError> error;

    const Token& peek() const { return toks[pos]; }

    bool at(Token::Kind k) const { return toks[pos].kind == k; }

    bool at_ident(const char* text) const {
        return toks[pos].kind == Token::Kind::ident && toks[pos].text == text;
    }

    const Token* eat(Token::Kind k, const char* what) {
        if (!at(k)) {
            fail(std::string("expected ") + what);
            return nullptr;
        }
        return &toks[pos++];
    }

    void fail(const std::string& msg) {
        if (!error) error = ParseError{msg + ", found '" + peek().text + "'", peek().line, peek().col};
    }

    std::vector<std::string> var_list() {
        std::vector<std::string> vs;
        if (!eat(Token::Kind::lbracket, "'['")) return vs;
        while (true) {
            const Token* t = eat(Token::Kind::ident, "variable name");
            if (!t) return vs;
            vs.push_back(t->text);
            if (at(Token::Kind::comma)) {
                ++pos;
                continue;
            }
            break;
        }
        eat(Token::Kind::rbracket, "']'");
        return vs;
    }

    // M(name)[vars]
    bool meas_head(std::string& name, std::vector<std::string>& vars) {
        const Token* m = eat(Token::Kind::ident, "'M'");
        if (!m) return false;
        if (m->text != "M") {
            --pos;
            fail("expected 'M'");
            return false;
        }
        if (!eat(Token::Kind::lparen, "'('")) return false;
        const Token* n = eat(Token::Kind::ident, "measurement name");
        if (!n) return false;
        name = n->text;
        if (!eat(Token::Kind::rparen, "')'")) return false;
        vars = var_list();
        return !error;
    }

    ProgramPtr statement() {
        if (at_ident("skip")) {
            ++pos;
            return prog_skip();
        }
        if (at_ident("abort")) {
            ++pos;
            return prog_abort();
        }
        if (at_ident("if")) {
            ++pos;
            std::string name;
            std::vector<std::string> vars;
            if (!meas_head(name, vars)) return nullptr;
            if (!eat(Token::Kind::lbrace, "'{'")) return nullptr;
            std::vector<int> outcomes;
            std::vector<ProgramPtr> branches;
            while (at(Token::Kind::integer)) {
                const Token* o = eat(Token::Kind::integer, "outcome");
                const int label = std::stoi(o->text);
                if (std::find(outcomes.begin(), outcomes.end(), label) != outcomes.end()) {
                    --pos;
                    fail("duplicate outcome branch");
                    return nullptr;
                }
                if (!eat(Token::Kind::arrow, "'->'")) return nullptr;
                if (!eat(Token::Kind::lbrace, "'{'")) return nullptr;
                ProgramPtr body = sequence();
                if (!body) return nullptr;
                if (!eat(Token::Kind::rbrace, "'}'")) return nullptr;
                outcomes.push_back(label);
                branches.push_back(std::move(body));
            }
            if (branches.empty()) {
                fail("if statement needs at least one outcome branch");
                return nullptr;
            }
            if (!eat(Token::Kind::rbrace, "'}'")) return nullptr;
            return prog_if(vars, name, std::move(outcomes), std::move(branches));
        }
        if (at_ident("while")) {
            ++pos;
            std::string name;
            std::vector<std::string> vars;
            if (!meas_head(name, vars)) return nullptr;
            if (!eat(Token::Kind::eq_eq, "'=='")) return nullptr;
            const Token* one = eat(Token::Kind::integer, "'1'");
            if (!one) return nullptr;
            if (one->text != "1") {
                --pos;
                fail("while guard must compare against outcome 1");
                return nullptr;
            }
            if (!at_ident("do")) {
                fail("expected 'do'");
                return nullptr;
            }
            ++pos;
            const bool braced = at(Token::Kind::lbrace);  // braces are optional
            if (braced) ++pos;
            ProgramPtr body = sequence();
            if (!body) return nullptr;
            if (braced && !eat(Token::Kind::rbrace, "'}'")) return nullptr;
            if (!at_ident("od")) {
                fail("expected 'od'");
                return nullptr;
            }
            ++pos;
            return prog_while(vars, name, std::move(body));
        }
        if (at(Token::Kind::lbracket)) {
            std::vector<std::string> vars = var_list();
            if (error) return nullptr;
            if (!eat(Token::Kind::star_eq, "'*='")) return nullptr;
            const Token* u = eat(Token::Kind::ident, "'U'");
            if (!u) return nullptr;
            if (u->text != "U") {
                --pos;
                fail("expected 'U'");
                return nullptr;
            }
            if (!eat(Token::Kind::lparen, "'('")) return nullptr;
            const Token* n = eat(Token::Kind::ident, "unitary name");
            if (!n) return nullptr;
            std::string name = n->text;
            if (!eat(Token::Kind::rparen, "')'")) return nullptr;
            return prog_unitary(vars, name);
        }
        if (at(Token::Kind::ident)) {
            const Token* v = eat(Token::Kind::ident, "variable");
            std::string var = v->text;
            if (!eat(Token::Kind::assign, "':='")) return nullptr;
            if (!eat(Token::Kind::ket0, "'|0>'")) return nullptr;
            return prog_init(var);
        }
        fail("expected a statement");
        return nullptr;
    }

    ProgramPtr sequence() {
        ProgramPtr left = statement();
        if (!left) return nullptr;
        while (at(Token::Kind::semi)) {
            ++pos;
            // Trailing separator before a closing brace or end of input.
            if (at(Token::Kind::rbrace) || at(Token::Kind::eof)) break;
            ProgramPtr right = statement();
            if (!right) return nullptr;
            left = prog_seq(std::move(left), std::move(right));
        }
        return left;
    }
};

}  // namespace

std::variant<ProgramPtr, ParseError> parse_program(const std::string& src) {
    Lexer lex(src);
    std::vector<Token> toks = lex.run();
    if (lex.error) return *lex.error;
    Parser p{std::move(toks)};
    ProgramPtr prog = p.sequence();
    if (p.error) return *p.error;
    if (!p.at(Token::Kind::eof)) {
        return ParseError{"unexpected trailing input '" + p.peek().text + "'", p.peek().line,
                          p.peek().col};
    }
    return prog;
}

ProgramPtr parse_program_or_throw(const std::string& src) {
    auto r = parse_program(src);
    if (std::holds_alternative<ParseError>(r)) {
        const auto& e = std::get<ParseError>(r);
        throw std::invalid_argument("parse error at " + std::to_string(e.line) + ":" +
                                    std::to_string(e.col) + ": " + e.message);
    }
    return std::get<ProgramPtr>(r);
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

int Environment::var_dim(const std::string& name) const {
    for (const auto& [n, d] : vars)
        if (n == name) return d;
    throw std::invalid_argument("unknown variable '" + name + "'");
}

bool Environment::has_var(const std::string& name) const {
    for (const auto& [n, d] : vars)
        if (n == name) return true;
    return false;
}

namespace {

Mat builtin_unitary(const std::string& name) {
    if (name == "X") {
        Mat m(2, 2);
        m(0, 1) = 1.0;
        m(1, 0) = 1.0;
        return m;
    }
    if (name == "Y") {
        Mat m(2, 2);
        m(0, 1) = cx(0.0, -1.0);
        m(1, 0) = cx(0.0, 1.0);
        return m;
    }
    if (name == "Z") {
        Mat m = Mat::identity(2);
        m(1, 1) = -1.0;
        return m;
    }
    if (name == "H") {
        const double s = 1.0 / std::sqrt(2.0);
        Mat m(2, 2);
        m(0, 0) = s;
        m(0, 1) = s;
        m(1, 0) = s;
        m(1, 1) = -s;
        return m;
    }
    if (name == "CNOT") {
        Mat m = Mat::zero(4, 4);
        m(0, 0) = 1.0;
        m(1, 1) = 1.0;
        m(2, 3) = 1.0;
        m(3, 2) = 1.0;
        return m;
    }
    if (name == "SWAP") return swap_operator(2);
    return Mat();
}

}  // namespace

Mat Environment::unitary(const std::string& name, int dim) const {
    auto it = unitaries.find(name);
    if (it != unitaries.end()) {
        if (it->second.rows != dim)
            throw std::invalid_argument("unitary '" + name + "' has dimension " +
                                        std::to_string(it->second.rows) + ", statement needs " +
                                        std::to_string(dim));
        return it->second;
    }
    Mat b = builtin_unitary(name);
    if (b.rows == 0) throw std::invalid_argument("unknown unitary '" + name + "'");
    if (b.rows != dim)
        throw std::invalid_argument("built-in unitary '" + name + "' has dimension " +
                                    std::to_string(b.rows) + ", statement needs " +
                                    std::to_string(dim));
    return b;
}

std::vector<Mat> Environment::measurement(const std::string& name, int dim) const {
    auto it = measurements.find(name);
    if (it != measurements.end()) {
        if (it->second.empty() || it->second[0].rows != dim)
            throw std::invalid_argument("measurement '" + name + "' dimension mismatch");
        return it->second;
    }
    if (name == "comp") {
        std::vector<Mat> ms;
        for (int m = 0; m < dim; ++m) {
            Mat proj = Mat::zero(dim, dim);
            proj(m, m) = 1.0;
            ms.push_back(std::move(proj));
        }
        return ms;
    }
    throw std::invalid_argument("unknown measurement '" + name + "'");
}

Environment env_from_json(const nlohmann::json& j) {
    Environment e;
    if (j.contains("vars")) {
        for (auto it = j.at("vars").begin(); it != j.at("vars").end(); ++it) {
            const int d = it.value().get<int>();
            if (d < 1) throw std::invalid_argument("variable '" + it.key() + "' has dimension < 1");
            e.vars.emplace_back(it.key(), d);
        }
    }
    if (j.contains("unitaries")) {
        for (auto it = j.at("unitaries").begin(); it != j.at("unitaries").end(); ++it) {
            Mat u = mat_from_json(it.value());
            if (!u.is_square()) throw std::invalid_argument("unitary '" + it.key() + "' not square");
            Mat gram = dagger(u) * u;
            if (max_abs(gram - Mat::identity(u.rows)) > 1e-9)
                throw std::invalid_argument("unitary '" + it.key() + "' is not unitary");
            e.unitaries[it.key()] = std::move(u);
        }
    }
    if (j.contains("measurements")) {
        for (auto it = j.at("measurements").begin(); it != j.at("measurements").end(); ++it) {
            std::vector<Mat> ms;
            Mat sum;
            for (const auto& mj : it.value()) {
                Mat m = mat_from_json(mj);
                if (!m.is_square()) throw std::invalid_argument("measurement operator not square");
                if (sum.rows == 0) sum = Mat::zero(m.rows, m.cols);
                sum += dagger(m) * m;
                ms.push_back(std::move(m));
            }
            if (ms.empty()) throw std::invalid_argument("measurement '" + it.key() + "' is empty");
            if (max_abs(sum - Mat::identity(sum.rows)) > 1e-9)
                throw std::invalid_argument("measurement '" + it.key() +
                                            "' operators do not sum to identity");
            e.measurements[it.key()] = std::move(ms);
        }
    }
    return e;
}

nlohmann::json env_to_json(const Environment& e) {
    nlohmann::json j;
    j["vars"] = nlohmann::json::object();
    for (const auto& [n, d] : e.vars) j["vars"][n] = d;
    j["unitaries"] = nlohmann::json::object();
    for (const auto& [n, u] : e.unitaries) j["unitaries"][n] = mat_to_json(u);
    j["measurements"] = nlohmann::json::object();
    for (const auto& [n, ms] : e.measurements) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& m : ms) arr.push_back(mat_to_json(m));
        j["measurements"][n] = std::move(arr);
    }
    return j;
}

// ---------------------------------------------------------------------------
// Superoperators
// ---------------------------------------------------------------------------

Superoperator superop_identity(int d) {
    return Superoperator{d, d, Mat::identity(d * d)};
}

Superoperator superop_zero(int d) {
    return Superoperator{d, d, Mat::zero(d * d, d * d)};
}

Superoperator superop_from_kraus(const std::vector<Mat>& kraus) {
    if (kraus.empty()) throw std::invalid_argument("superop_from_kraus: empty Kraus list");
    const int out = kraus[0].rows, in = kraus[0].cols;
    Mat t = Mat::zero(out * out, in * in);
    for (const auto& k : kraus) {
        if (k.rows != out || k.cols != in)
            throw std::invalid_argument("superop_from_kraus: inconsistent shapes");
        t += kron(conj(k), k);  // column-stacking convention
    }
    return Superoperator{in, out, std::move(t)};
}

Mat superop_apply(const Superoperator& e, const Mat& x) {
    if (x.rows != e.in_dim || x.cols != e.in_dim)
        throw std::invalid_argument("superop_apply: dimension mismatch");
    return unvec_col(e.transfer * vec_col(x), e.out_dim, e.out_dim);
}

Superoperator superop_compose(const Superoperator& second, const Superoperator& first) {
    if (first.out_dim != second.in_dim)
        throw std::invalid_argument("superop_compose: dimension mismatch");
    return Superoperator{first.in_dim, second.out_dim, second.transfer * first.transfer};
}

Superoperator superop_add(const Superoperator& a, const Superoperator& b) {
    if (a.in_dim != b.in_dim || a.out_dim != b.out_dim)
        throw std::invalid_argument("superop_add: dimension mismatch");
    return Superoperator{a.in_dim, a.out_dim, a.transfer + b.transfer};
}

Superoperator superop_dual(const Superoperator& e) {
    return Superoperator{e.out_dim, e.in_dim, dagger(e.transfer)};
}

Mat superop_dual_apply(const Superoperator& e, const Mat& a) {
    if (a.rows != e.out_dim || a.cols != e.out_dim)
        throw std::invalid_argument("superop_dual_apply: dimension mismatch");
    return unvec_col(dagger(e.transfer) * vec_col(a), e.in_dim, e.in_dim);
}

Superoperator superop_tensor(const Superoperator& a, const Superoperator& b) {
    const int i1 = a.in_dim, o1 = a.out_dim, i2 = b.in_dim, o2 = b.out_dim;
    const int in = i1 * i2, out = o1 * o2;
    Mat t = Mat::zero(out * out, in * in);
    // vec_col index of entry (r, c) in a d-dim matrix is c*d + r.
    for (int r1 = 0; r1 < o1; ++r1)
        for (int c1 = 0; c1 < o1; ++c1)
            for (int i = 0; i < i1; ++i)
                for (int j = 0; j < i1; ++j) {
                    const cx t1 = a.transfer(c1 * o1 + r1, j * i1 + i);
                    if (t1 == cx(0.0, 0.0)) continue;
                    for (int r2 = 0; r2 < o2; ++r2)
                        for (int c2 = 0; c2 < o2; ++c2)
                            for (int k = 0; k < i2; ++k)
                                for (int l = 0; l < i2; ++l) {
                                    const cx t2 = b.transfer(c2 * o2 + r2, l * i2 + k);
                                    if (t2 == cx(0.0, 0.0)) continue;
                                    const int row = (c1 * o2 + c2) * out + (r1 * o2 + r2);
                                    const int col = (j * i2 + l) * in + (i * i2 + k);
                                    t(row, col) = t1 * t2;
                                }
                }
    return Superoperator{in, out, std::move(t)};
}

Mat choi_matrix(const Superoperator& e) {
    const int in = e.in_dim, out = e.out_dim;
    Mat c(in * out, in * out);
    // C[(i,a),(j,b)] = <a| E(|i><j|) |b> = T[b*out + a, j*in + i]
    for (int i = 0; i < in; ++i)
        for (int a = 0; a < out; ++a)
            for (int j = 0; j < in; ++j)
                for (int b = 0; b < out; ++b)
                    c(i * out + a, j * out + b) = e.transfer(b * out + a, j * in + i);
    return c;
}

Superoperator superop_from_choi(const Mat& choi, int in_dim, int out_dim) {
    if (choi.rows != in_dim * out_dim)
        throw std::invalid_argument("superop_from_choi: dimension mismatch");
    Mat t(out_dim * out_dim, in_dim * in_dim);
    for (int i = 0; i < in_dim; ++i)
        for (int a = 0; a < out_dim; ++a)
            for (int j = 0; j < in_dim; ++j)
                for (int b = 0; b < out_dim; ++b)
                    t(b * out_dim + a, j * in_dim + i) = choi(i * out_dim + a, j * out_dim + b);
    return Superoperator{in_dim, out_dim, std::move(t)};
}

std::vector<Mat> kraus_from_choi(const Mat& choi, int in_dim, int out_dim, double cutoff) {
    auto e = herm_eig(choi);
    const double lam_max = e.values.empty() ? 0.0 : e.values.front();
    const double cut = cutoff * std::max(1.0, lam_max);
    std::vector<Mat> ks;
    for (size_t j = 0; j < e.values.size(); ++j) {
        if (e.values[j] <= cut) continue;
        const double s = std::sqrt(e.values[j]);
        Mat k(out_dim, in_dim);
        for (int i = 0; i < in_dim; ++i)
            for (int a = 0; a < out_dim; ++a)
                k(a, i) = s * e.vectors(i * out_dim + a, static_cast<int>(j));
        ks.push_back(std::move(k));
    }
    return ks;
}

bool is_cp(const Superoperator& e, double tol) {
    Mat c = choi_matrix(e);
    return lambda_min(herm_part(c)) >= -tol * (1.0 + max_abs(c));
}

bool is_trace_nonincreasing(const Superoperator& e, double tol) {
    Mat d = superop_dual_apply(e, Mat::identity(e.out_dim));
    return lambda_max(herm_part(d) - Mat::identity(e.in_dim)) <= tol;
}

bool is_ast(const Superoperator& e, double tol) {
    Mat d = superop_dual_apply(e, Mat::identity(e.out_dim));
    return max_abs(d - Mat::identity(e.in_dim)) <= tol;
}

IVPredicate dual_apply_ivp(const Superoperator& e, const IVPredicate& a) {
    if (a.dim != e.out_dim) throw std::invalid_argument("dual_apply_ivp: dimension mismatch");
    Mat xs = support_projector(herm_part(superop_dual_apply(e, a.inf_proj)));
    Mat p = herm_part(superop_dual_apply(e, a.finite));
    // Clip the tiny negative eigenvalues the dual map can introduce numerically.
    auto eg = herm_eig(p);
    Mat pf = Mat::zero(p.rows, p.cols);
    for (size_t j = 0; j < eg.values.size(); ++j) {
        if (eg.values[j] <= 0.0) continue;
        for (int i = 0; i < p.rows; ++i)
            for (int k = 0; k < p.cols; ++k)
                pf(i, k) += eg.values[j] * eg.vectors(i, static_cast<int>(j)) *
                            std::conj(eg.vectors(k, static_cast<int>(j)));
    }
    return ivp_new(pf, xs);
}

// ---------------------------------------------------------------------------
// Denotation
// ---------------------------------------------------------------------------

namespace {

struct Space {
    std::vector<std::string> names;
    std::vector<int> dims;
    int total = 1;

    int index_of(const std::string& v) const {
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == v) return static_cast<int>(i);
        throw std::invalid_argument("unknown variable '" + v + "'");
    }
};

// Embeds an operator acting on the listed variables (in listed order) into the
// full space, identity elsewhere.
Mat embed_op(const Mat& op, const std::vector<std::string>& listed, const Space& sp) {
    std::vector<int> lidx;
    for (const auto& v : listed) lidx.push_back(sp.index_of(v));
    int sub_dim = 1;
    for (int li : lidx) sub_dim *= sp.dims[li];
    if (op.rows != sub_dim || op.cols != sub_dim)
        throw std::invalid_argument("operator dimension does not match listed variables");

    const int n = static_cast<int>(sp.dims.size());
    std::vector<bool> in_listed(n, false);
    for (int li : lidx) in_listed[li] = true;

    std::vector<int> sub_of(sp.total), rest_of(sp.total);
    std::vector<int> tuple(n);
    for (int f = 0; f < sp.total; ++f) {
        int rem = f;
        for (int k = n - 1; k >= 0; --k) {
            tuple[k] = rem % sp.dims[k];
            rem /= sp.dims[k];
        }
        int s = 0;
        for (int li : lidx) s = s * sp.dims[li] + tuple[li];
        int r = 0;
        for (int k = 0; k < n; ++k)
            if (!in_listed[k]) r = r * sp.dims[k] + tuple[k];
        sub_of[f] = s;
        rest_of[f] = r;
    }

    Mat full = Mat::zero(sp.total, sp.total);
    for (int f = 0; f < sp.total; ++f)
        for (int g = 0; g < sp.total; ++g)
            if (rest_of[f] == rest_of[g]) full(f, g) = op(sub_of[f], sub_of[g]);
    return full;
}

struct LoopStats {
    bool converged = true;
    double residual = 0.0;
    int iterations = 0;
};

Superoperator denote_rec(const ProgramPtr& p, const Environment& env, const Space& sp,
                         const DenoteOptions& opts, LoopStats& stats) {
    const int d = sp.total;
    switch (p->kind) {
        case Program::Kind::skip:
            return superop_identity(d);
        case Program::Kind::abort:
            return superop_zero(d);
        case Program::Kind::init: {
            const int vd = env.var_dim(p->vars[0]);
            std::vector<Mat> kraus;
            for (int nn = 0; nn < vd; ++nn) {
                Mat k = Mat::zero(vd, vd);
                k(0, nn) = 1.0;
                kraus.push_back(embed_op(k, p->vars, sp));
            }
            return superop_from_kraus(kraus);
        }
        case Program::Kind::unitary: {
            int sub = 1;
            for (const auto& v : p->vars) sub *= env.var_dim(v);
            Mat u = env.unitary(p->name, sub);
            return superop_from_kraus({embed_op(u, p->vars, sp)});
        }
        case Program::Kind::seq: {
            Superoperator first = denote_rec(p->children[0], env, sp, opts, stats);
            Superoperator second = denote_rec(p->children[1], env, sp, opts, stats);
            return superop_compose(second, first);
        }
        case Program::Kind::ifmeas: {
            int sub = 1;
            for (const auto& v : p->vars) sub *= env.var_dim(v);
            std::vector<Mat> ms = env.measurement(p->name, sub);
            if (ms.size() != p->children.size())
                throw std::invalid_argument("if statement must cover all " +
                                            std::to_string(ms.size()) + " outcomes of '" +
                                            p->name + "'");
            Superoperator total = superop_zero(d);
            for (size_t bi = 0; bi < p->children.size(); ++bi) {
                const int label = p->outcomes[bi];
                if (label < 0 || label >= static_cast<int>(ms.size()))
                    throw std::invalid_argument("outcome " + std::to_string(label) +
                                                " out of range for measurement '" + p->name + "'");
                Superoperator meas =
                    superop_from_kraus({embed_op(ms[label], p->vars, sp)});
                Superoperator branch = denote_rec(p->children[bi], env, sp, opts, stats);
                total = superop_add(total, superop_compose(branch, meas));
            }
            return total;
        }
        case Program::Kind::whilemeas: {
            int sub = 1;
            for (const auto& v : p->vars) sub *= env.var_dim(v);
            std::vector<Mat> ms = env.measurement(p->name, sub);
            if (ms.size() != 2)
                throw std::invalid_argument("while guard measurement '" + p->name +
                                            "' must have exactly 2 outcomes");
            Superoperator e0 = superop_from_kraus({embed_op(ms[0], p->vars, sp)});
            Superoperator e1 = superop_from_kraus({embed_op(ms[1], p->vars, sp)});
            Superoperator body = denote_rec(p->children[0], env, sp, opts, stats);
            Superoperator step = superop_compose(body, e1);
            // Kleene iteration: W_{k+1} = E_0 + W_k o (body o E_1), W_0 = 0.
            Superoperator w = superop_zero(d);
            bool converged = false;
            double res = 0.0;
            int it = 0;
            for (; it < opts.loop_max_iter; ++it) {
                Superoperator next = superop_add(e0, superop_compose(w, step));
                res = max_abs(next.transfer - w.transfer);
                w = std::move(next);
                if (res <= opts.fix_tol) {
                    converged = true;
                    ++it;
                    break;
                }
            }
            stats.converged = stats.converged && converged;
            stats.residual = std::max(stats.residual, converged ? 0.0 : res);
            stats.iterations = std::max(stats.iterations, it);
            return w;
        }
    }
    throw std::logic_error("denote: unhandled node kind");
}

}  // namespace

Denotation denote_with_vars(const ProgramPtr& p, const Environment& env,
                            const std::vector<std::string>& var_order,
                            const DenoteOptions& opts) {
    Space sp;
    for (const auto& v : var_order) {
        const int d = env.var_dim(v);
        sp.names.push_back(v);
        sp.dims.push_back(d);
        if (sp.total > opts.dim_cap / std::max(d, 1))
            throw std::invalid_argument("program dimension exceeds cap of " +
                                        std::to_string(opts.dim_cap));
        sp.total *= d;
    }
    LoopStats stats;
    Denotation out;
    out.op = denote_rec(p, env, sp, opts, stats);
    out.var_order = var_order;
    out.dim = sp.total;
    out.loops_converged = stats.converged;
    out.loop_residual = stats.residual;
    out.loop_iterations = stats.iterations;
    return out;
}

Denotation denote(const ProgramPtr& p, const Environment& env, const DenoteOptions& opts) {
    return denote_with_vars(p, env, program_vars(p), opts);
}

Mat embed_operator(const Mat& op, const std::vector<std::string>& listed,
                   const Environment& env, const std::vector<std::string>& var_order) {
    Space sp;
    for (const auto& v : var_order) {
        sp.names.push_back(v);
        sp.dims.push_back(env.var_dim(v));
        sp.total *= sp.dims.back();
    }
    return embed_op(op, listed, sp);
}

}  // namespace qotl
