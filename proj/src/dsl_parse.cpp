#include "gsim/dsl.hpp"

#include "gsim/errors.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

namespace gsim::dsl {

namespace {

enum class Tok { Ident, Number, String, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double number = 0.0;
    std::size_t line = 0;
    std::size_t column = 0;
};

class Lexer {
  public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token t;
            t.line = line_;
            t.column = col_;
            if (pos_ >= src_.size()) {
                t.kind = Tok::End;
                out.push_back(t);
                return out;
            }
            const char c = src_[pos_];
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                t.kind = Tok::Ident;
                while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                    t.text += advance();
                }
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
                t.kind = Tok::Number;
                lex_number(t);
            } else if (c == '"') {
                t.kind = Tok::String;
                advance();
                for (;;) {
                    if (pos_ >= src_.size()) throw ParseError("unterminated string", t.line, t.column);
                    char ch = advance();
                    if (ch == '"') break;
                    if (ch == '\\') {
                        if (pos_ >= src_.size()) throw ParseError("unterminated string", t.line, t.column);
                        ch = advance();
                        if (ch == 'n') ch = '\n';
                    }
                    t.text += ch;
                }
            } else if (std::string_view("{}()[];,=:+-*/").find(c) != std::string_view::npos) {
                t.kind = Tok::Punct;
                t.text = std::string(1, advance());
            } else {
                throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
            }
            out.push_back(std::move(t));
        }
    }

  private:
    char advance() {
        const char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_space() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    void lex_number(Token& t) {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) advance();
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
            if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
                while (pos_ < look) advance();
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
            }
        }
        t.text = std::string(src_.substr(start, pos_ - start));
        const auto* first = t.text.data();
        const auto* last = first + t.text.size();
        auto [ptr, ec] = std::from_chars(first, last, t.number);
        if (ec != std::errc() || ptr != last) throw ParseError("malformed number '" + t.text + "'", t.line, t.column);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

// Generic right-hand side of a named rule argument, interpreted per rule kind.
struct Value;
using MapEntries = std::vector<std::pair<std::string, Value>>;
struct GateEntries {
    std::vector<GateOption> options;
};
struct Value {
    std::variant<ExprPtr, CountSampler, MapEntries, GateEntries> v;
    std::size_t line = 0, column = 0;
};

const std::set<std::string, std::less<>> kSamplers = {"Binomial", "Poisson", "NegBinomial", "Normal", "Deterministic"};
const std::set<std::string, std::less<>> kRules = {"CompartmentFlow", "Accumulate",   "PipelineAdvance",
                                                   "PipelineAppend",  "QueueService", "RecordCountdown",
                                                   "RecordHazard",    "RecordSpawn",  "Assign"};

class Parser {
  public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    StructuralConfig parse() {
        if (peek().kind == Tok::End) throw ParseError("no config block", 1, 1);
        expect_word("config");
        StructuralConfig cfg;
        cfg.name = expect_ident("config name");
        expect("{");
        if (is_word("description")) {
            next();
            const Token& s = next();
            if (s.kind != Tok::String) fail(s, "expected string after 'description'");
            cfg.description = s.text;
            expect(";");
        }
        if (is_word("action")) {
            next();
            expect_word("int");
            expect(";");
            cfg.uses_action = true;
        }
        parse_params(cfg);
        parse_state(cfg);
        config_ = &cfg;
        parse_rules(cfg);
        expect("}");
        if (peek().kind != Tok::End) fail(peek(), "unexpected text after config block");
        return cfg;
    }

  private:
    const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    const Token& next() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    [[noreturn]] static void fail(const Token& t, const std::string& msg) { throw ParseError(msg, t.line, t.column); }
    bool is_punct(std::string_view p) const { return peek().kind == Tok::Punct && peek().text == p; }
    bool is_word(std::string_view w) const { return peek().kind == Tok::Ident && peek().text == w; }
    void expect(std::string_view p) {
        if (!is_punct(p)) fail(peek(), "expected '" + std::string(p) + "'" + found());
        next();
    }
    void expect_word(std::string_view w) {
        if (!is_word(w)) fail(peek(), "expected '" + std::string(w) + "'" + found());
        next();
    }
    std::string expect_ident(const std::string& what) {
        if (peek().kind != Tok::Ident) fail(peek(), "expected " + what + found());
        return next().text;
    }
    std::string found() const {
        const Token& t = peek();
        if (t.kind == Tok::End) return " but reached end of input";
        return " but found '" + t.text + "'";
    }

    double signed_number() {
        double sign = 1.0;
        if (is_punct("-")) {
            next();
            sign = -1.0;
        } else if (is_punct("+")) {
            next();
        }
        if (peek().kind != Tok::Number) fail(peek(), "expected number" + found());
        return sign * next().number;
    }

    std::int64_t signed_integer() {
        const Token& t = peek();
        const double v = signed_number();
        if (v != std::trunc(v)) fail(t, "expected integer");
        return static_cast<std::int64_t>(v);
    }

    void parse_params(StructuralConfig& cfg) {
        expect_word("params");
        expect("{");
        while (!is_punct("}")) {
            const Token& at = peek();
            ParameterDecl d;
            d.name = expect_ident("parameter name");
            if (cfg.param_index(d.name)) fail(at, "duplicate parameter '" + d.name + "'");
            expect("=");
            d.default_value = signed_number();
            expect_word("in");
            expect("[");
            d.min = signed_number();
            expect(",");
            d.max = signed_number();
            expect("]");
            expect(";");
            cfg.params.push_back(std::move(d));
        }
        expect("}");
    }

    void parse_state(StructuralConfig& cfg) {
        expect_word("state");
        expect("{");
        while (!is_punct("}")) {
            const Token& at = peek();
            FieldDecl f;
            f.name = expect_ident("field name");
            if (cfg.field_index(f.name)) fail(at, "duplicate field '" + f.name + "'");
            expect(":");
            const Token& kind_tok = peek();
            const std::string kind = expect_ident("field kind");
            if (kind == "int") {
                f.kind = ValueKind::Int;
            } else if (kind == "float") {
                f.kind = ValueKind::Float;
            } else if (kind == "pipeline") {
                f.kind = ValueKind::Pipeline;
            } else if (kind == "records") {
                f.kind = ValueKind::Records;
                expect("(");
                for (;;) {
                    const Token& attr_tok = peek();
                    std::string attr = expect_ident("attribute name");
                    if (f.record_schema.index_of(attr)) fail(attr_tok, "duplicate attribute '" + attr + "'");
                    expect(":");
                    const Token& ak = peek();
                    const auto akind = attr_kind_from(expect_ident("attribute kind"));
                    if (!akind) fail(ak, "unknown attribute kind '" + ak.text + "'");
                    f.record_schema.attrs.emplace_back(std::move(attr), *akind);
                    if (is_punct(",")) {
                        next();
                        continue;
                    }
                    break;
                }
                expect(")");
            } else {
                fail(kind_tok, "unknown field kind '" + kind + "'");
            }
            expect("=");
            if (f.kind == ValueKind::Pipeline || f.kind == ValueKind::Records) {
                expect("[");
                while (!is_punct("]")) {
                    if (f.kind == ValueKind::Records) fail(peek(), "record lists must start empty");
                    expect("(");
                    QuantityTimer qt;
                    qt.quantity = signed_integer();
                    expect(",");
                    qt.timer = signed_integer();
                    expect(")");
                    f.init.pipeline.push_back(qt);
                    if (is_punct(",")) next();
                }
                expect("]");
            } else {
                f.init.number = signed_number();
            }
            expect(";");
            cfg.state.push_back(std::move(f));
        }
        expect("}");
    }

    void parse_rules(StructuralConfig& cfg) {
        expect_word("rules");
        expect("{");
        while (!is_punct("}")) {
            cfg.rules.push_back(parse_rule());
            expect(";");
        }
        expect("}");
    }

    // --- expressions -------------------------------------------------------

    ExprPtr parse_expr() {
        ExprPtr lhs = parse_term();
        while (is_punct("+") || is_punct("-")) {
            const bool add = next().text == "+";
            ExprPtr rhs = parse_term();
            lhs = Expr::binary(add ? ExprKind::Add : ExprKind::Sub, lhs, rhs);
        }
        return lhs;
    }

    ExprPtr parse_term() {
        ExprPtr lhs = parse_unary();
        while (is_punct("*") || is_punct("/")) {
            const bool mul = next().text == "*";
            ExprPtr rhs = parse_unary();
            lhs = Expr::binary(mul ? ExprKind::Mul : ExprKind::Div, lhs, rhs);
        }
        return lhs;
    }

    ExprPtr parse_unary() {
        if (is_punct("-")) {
            next();
            if (peek().kind == Tok::Number) return Expr::literal(-next().number);
            return Expr::unary(ExprKind::Neg, parse_unary());
        }
        if (is_punct("+")) {
            next();
            return parse_unary();
        }
        return parse_primary();
    }

    ExprPtr parse_primary() {
        const Token& t = peek();
        if (t.kind == Tok::Number) return Expr::literal(next().number);
        if (is_punct("(")) {
            next();
            ExprPtr e = parse_expr();
            expect(")");
            return e;
        }
        if (t.kind != Tok::Ident) fail(t, "expected expression" + found());
        const std::string name = next().text;
        if (name == "action") return Expr::action();
        if (is_punct("(")) {
            static const std::pair<std::string_view, std::pair<ExprKind, std::size_t>> fns[] = {
                {"exp", {ExprKind::Exp, 1}}, {"log", {ExprKind::Log, 1}}, {"pow", {ExprKind::Pow, 2}},
                {"min", {ExprKind::Min, 2}}, {"max", {ExprKind::Max, 2}}, {"clip", {ExprKind::Clip, 3}}};
            for (const auto& [fname, spec] : fns) {
                if (fname != name) continue;
                next();
                std::vector<ExprPtr> args;
                if (!is_punct(")")) {
                    args.push_back(parse_expr());
                    while (is_punct(",")) {
                        next();
                        args.push_back(parse_expr());
                    }
                }
                expect(")");
                if (args.size() != spec.second) {
                    fail(t, name + "() takes " + std::to_string(spec.second) + " argument(s), got " +
                                std::to_string(args.size()));
                }
                return Expr::call(spec.first, std::move(args));
            }
            fail(t, "unknown function '" + name + "'");
        }
        // param, then field, then record attribute
        if (config_ != nullptr && config_->param_index(name)) return Expr::param(name);
        if (config_ != nullptr && config_->field_index(name)) return Expr::field(name);
        return Expr::attr(name);
    }

    // --- rule arguments ----------------------------------------------------

    Value parse_value() {
        const Token& t = peek();
        Value v;
        v.line = t.line;
        v.column = t.column;
        if (t.kind == Tok::Ident && kSamplers.count(t.text) != 0 && peek(1).kind == Tok::Punct && peek(1).text == "(") {
            v.v = parse_sampler();
        } else if (is_punct("{")) {
            next();
            MapEntries entries;
            while (!is_punct("}")) {
                std::string key = expect_ident("map key");
                expect(":");
                entries.emplace_back(std::move(key), parse_value());
                if (!is_punct(",")) break;
                next();
            }
            expect("}");
            v.v = std::move(entries);
        } else if (is_punct("[")) {
            next();
            GateEntries gate;
            while (!is_punct("]")) {
                expect("(");
                GateOption opt;
                opt.bed_type = expect_ident("bed type");
                expect(",");
                opt.occupancy = expect_ident("occupancy field");
                expect(",");
                opt.capacity = parse_expr();
                expect(")");
                gate.options.push_back(std::move(opt));
                if (!is_punct(",")) break;
                next();
            }
            expect("]");
            v.v = std::move(gate);
        } else {
            v.v = parse_expr();
        }
        return v;
    }

    using Args = std::vector<std::pair<std::string, Value>>;

    Args parse_args(const Token& head, const std::set<std::string, std::less<>>& allowed) {
        expect("(");
        Args args;
        while (!is_punct(")")) {
            const Token& at = peek();
            std::string key = expect_ident("argument name");
            if (allowed.count(key) == 0) fail(at, "unknown argument '" + key + "' for " + head.text);
            for (const auto& a : args) {
                if (a.first == key) fail(at, "duplicate argument '" + key + "'");
            }
            expect("=");
            args.emplace_back(std::move(key), parse_value());
            if (!is_punct(",")) break;
            next();
        }
        expect(")");
        return args;
    }

    static const Value* find(const Args& args, std::string_view key) {
        for (const auto& a : args) {
            if (a.first == key) return &a.second;
        }
        return nullptr;
    }

    const Value& need(const Args& args, std::string_view key, const Token& head) {
        if (const auto* v = find(args, key)) return *v;
        fail(head, head.text + " requires argument '" + std::string(key) + "'");
    }

    static ExprPtr as_expr(const Value& v, const std::string& what) {
        if (const auto* e = std::get_if<ExprPtr>(&v.v)) return *e;
        throw ParseError("expected expression for " + what, v.line, v.column);
    }

    static CountSampler as_sampler(const Value& v, const std::string& what) {
        if (const auto* s = std::get_if<CountSampler>(&v.v)) return *s;
        throw ParseError("expected a sampler (Binomial, Poisson, NegBinomial, Normal, Deterministic) for " + what, v.line,
                         v.column);
    }

    static std::string as_name(const Value& v, const std::string& what) {
        if (const auto* e = std::get_if<ExprPtr>(&v.v)) {
            const auto k = (*e)->kind;
            if (k == ExprKind::Param || k == ExprKind::Field || k == ExprKind::Attr) return (*e)->name;
        }
        throw ParseError("expected a name for " + what, v.line, v.column);
    }

    static OccupancyMap as_occupancy(const Value& v) {
        const auto* m = std::get_if<MapEntries>(&v.v);
        if (m == nullptr) throw ParseError("expected {bed: field, ...} map for occupancy", v.line, v.column);
        OccupancyMap out;
        for (const auto& [k, val] : *m) out.emplace_back(k, as_name(val, "occupancy field"));
        return out;
    }

    CountSampler parse_sampler() {
        const Token& head = next();
        static const std::map<std::string, std::set<std::string, std::less<>>, std::less<>> allowed = {
            {"Binomial", {"n", "p"}},
            {"Poisson", {"rate"}},
            {"NegBinomial", {"mean", "dispersion"}},
            {"Normal", {"mean", "stdev", "floor"}},
            {"Deterministic", {"value"}}};
        const Args args = parse_args(head, allowed.at(head.text));
        const auto e = [&](std::string_view key) { return as_expr(need(args, key, head), std::string(key)); };
        if (head.text == "Binomial") return Binomial{e("n"), e("p")};
        if (head.text == "Poisson") return Poisson{e("rate")};
        if (head.text == "NegBinomial") return NegBinomial{e("mean"), e("dispersion")};
        if (head.text == "Normal") {
            Normal n{e("mean"), e("stdev"), 0};
            if (const auto* f = find(args, "floor")) {
                const ExprPtr fe = as_expr(*f, "floor");
                if (fe->kind != ExprKind::Literal || fe->value != std::trunc(fe->value)) {
                    throw ParseError("Normal floor must be an integer literal", f->line, f->column);
                }
                n.floor = static_cast<std::int64_t>(fe->value);
            }
            return n;
        }
        return Deterministic{e("value")};
    }

    UpdateRule parse_rule() {
        const Token& head = peek();
        if (head.kind != Tok::Ident || kRules.count(head.text) == 0) fail(head, "unknown rule kind" + found());
        next();
        static const std::map<std::string, std::set<std::string, std::less<>>, std::less<>> allowed = {
            {"CompartmentFlow", {"from", "to", "count"}},
            {"Accumulate", {"field", "delta", "sign"}},
            {"PipelineAdvance", {"pipeline", "deliver_to"}},
            {"PipelineAppend", {"pipeline", "quantity", "delay"}},
            {"QueueService", {"inventory", "backlog", "demand"}},
            {"RecordCountdown", {"records", "timer", "age", "bed", "occupancy"}},
            {"RecordHazard", {"records", "prob", "bed", "occupancy"}},
            {"RecordSpawn", {"records", "count", "attrs", "gate", "bed", "overflow"}},
            {"Assign", {"field", "expr"}}};
        const Args args = parse_args(head, allowed.at(head.text));
        const auto name = [&](std::string_view key) { return as_name(need(args, key, head), std::string(key)); };
        const auto opt_name = [&](std::string_view key) -> std::string {
            const auto* v = find(args, key);
            return v != nullptr ? as_name(*v, std::string(key)) : std::string();
        };
        const auto expr = [&](std::string_view key) { return as_expr(need(args, key, head), std::string(key)); };
        const auto sampler = [&](std::string_view key) { return as_sampler(need(args, key, head), std::string(key)); };
        const std::string& k = head.text;

        if (k == "CompartmentFlow") return CompartmentFlow{name("from"), name("to"), sampler("count")};
        if (k == "Accumulate") {
            int sign = 1;
            if (const auto* s = find(args, "sign")) {
                const ExprPtr se = as_expr(*s, "sign");
                if (se->kind != ExprKind::Literal || (se->value != 1.0 && se->value != -1.0)) {
                    throw ParseError("sign must be 1 or -1", s->line, s->column);
                }
                sign = se->value > 0 ? 1 : -1;
            }
            return Accumulate{name("field"), sampler("delta"), sign};
        }
        if (k == "PipelineAdvance") return PipelineAdvance{name("pipeline"), name("deliver_to")};
        if (k == "PipelineAppend") return PipelineAppend{name("pipeline"), expr("quantity"), expr("delay")};
        if (k == "QueueService") return QueueService{name("inventory"), name("backlog"), sampler("demand")};
        if (k == "RecordCountdown") {
            return RecordCountdown{name("records"), name("timer"), opt_name("age"), name("bed"),
                                   as_occupancy(need(args, "occupancy", head))};
        }
        if (k == "RecordHazard") {
            return RecordHazard{name("records"), expr("prob"), name("bed"), as_occupancy(need(args, "occupancy", head))};
        }
        if (k == "RecordSpawn") {
            RecordSpawn r;
            r.records = name("records");
            r.count = sampler("count");
            const Value& attrs = need(args, "attrs", head);
            const auto* m = std::get_if<MapEntries>(&attrs.v);
            if (m == nullptr) throw ParseError("expected {attr: value, ...} map for attrs", attrs.line, attrs.column);
            for (const auto& [an, av] : *m) {
                for (const auto& existing : r.attrs) {
                    if (existing.first == an) throw ParseError("duplicate attribute '" + an + "'", av.line, av.column);
                }
                if (const auto* s = std::get_if<CountSampler>(&av.v)) {
                    r.attrs.emplace_back(an, *s);
                } else {
                    r.attrs.emplace_back(an, as_expr(av, "attribute '" + an + "'"));
                }
            }
            if (const auto* g = find(args, "gate")) {
                const auto* ge = std::get_if<GateEntries>(&g->v);
                if (ge == nullptr) throw ParseError("expected [(bed, occupancy, capacity), ...] for gate", g->line, g->column);
                r.gate = ge->options;
            }
            r.bed = opt_name("bed");
            r.overflow = opt_name("overflow");
            return r;
        }
        return Assign{name("field"), expr("expr")};
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    const StructuralConfig* config_ = nullptr;
};

} // namespace

StructuralConfig parse_config(std::string_view text) {
    Parser p(Lexer(text).run());
    return p.parse();
}

} // namespace gsim::dsl
