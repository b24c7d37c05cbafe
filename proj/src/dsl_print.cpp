#include "gsim/dsl.hpp"

#include <charconv>
#include <sstream>

namespace gsim::dsl {

namespace {

std::string number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

int precedence(const Expr& e) {
    switch (e.kind) {
    case ExprKind::Add:
    case ExprKind::Sub: return 1;
    case ExprKind::Mul:
    case ExprKind::Div: return 2;
    default: return 3;
    }
}

std::string_view fn_name(ExprKind k) {
    switch (k) {
    case ExprKind::Exp: return "exp";
    case ExprKind::Log: return "log";
    case ExprKind::Pow: return "pow";
    case ExprKind::Min: return "min";
    case ExprKind::Max: return "max";
    case ExprKind::Clip: return "clip";
    default: return "";
    }
}

void print(std::ostream& os, const Expr& e);

void print_child(std::ostream& os, const Expr& child, bool parens) {
    if (parens) os << '(';
    print(os, child);
    if (parens) os << ')';
}

void print(std::ostream& os, const Expr& e) {
    switch (e.kind) {
    case ExprKind::Literal: os << number(e.value); return;
    case ExprKind::Param:
    case ExprKind::Field:
    case ExprKind::Attr: os << e.name; return;
    case ExprKind::Action: os << "action"; return;
    case ExprKind::Neg: {
        const Expr& a = *e.args[0];
        os << '-';
        print_child(os, a, precedence(a) < 3 || a.kind == ExprKind::Literal);
        return;
    }
    case ExprKind::Add:
    case ExprKind::Sub:
    case ExprKind::Mul:
    case ExprKind::Div: {
        static constexpr char ops[] = {'+', '-', '*', '/'};
        const int p = precedence(e);
        const Expr& l = *e.args[0];
        const Expr& r = *e.args[1];
        print_child(os, l, precedence(l) < p);
        os << ' ' << ops[static_cast<int>(e.kind) - static_cast<int>(ExprKind::Add)] << ' ';
        print_child(os, r, precedence(r) <= p);
        return;
    }
    default: {
        os << fn_name(e.kind) << '(';
        for (std::size_t i = 0; i < e.args.size(); ++i) {
            if (i != 0) os << ", ";
            print(os, *e.args[i]);
        }
        os << ')';
        return;
    }
    }
}

std::string expr(const ExprPtr& e) {
    std::ostringstream os;
    print(os, *e);
    return os.str();
}

std::string sampler(const CountSampler& s) {
    return std::visit(
        [](const auto& x) -> std::string {
            using S = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<S, Binomial>) {
                return "Binomial(n = " + expr(x.n) + ", p = " + expr(x.p) + ")";
            } else if constexpr (std::is_same_v<S, Poisson>) {
                return "Poisson(rate = " + expr(x.rate) + ")";
            } else if constexpr (std::is_same_v<S, NegBinomial>) {
                return "NegBinomial(mean = " + expr(x.mean) + ", dispersion = " + expr(x.dispersion) + ")";
            } else if constexpr (std::is_same_v<S, Normal>) {
                return "Normal(mean = " + expr(x.mean) + ", stdev = " + expr(x.stdev) +
                       ", floor = " + std::to_string(x.floor) + ")";
            } else {
                return "Deterministic(value = " + expr(x.value) + ")";
            }
        },
        s);
}

std::string occupancy(const OccupancyMap& m) {
    std::string out = "{";
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (i != 0) out += ", ";
        out += m[i].first + ": " + m[i].second;
    }
    return out + "}";
}

std::string rule(const UpdateRule& r) {
    std::string args = std::visit(
        [](const auto& x) -> std::string {
            using R = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<R, CompartmentFlow>) {
                return "from = " + x.from + ", to = " + x.to + ", count = " + sampler(x.count);
            } else if constexpr (std::is_same_v<R, Accumulate>) {
                return "field = " + x.field + ", delta = " + sampler(x.delta) + ", sign = " + std::to_string(x.sign);
            } else if constexpr (std::is_same_v<R, PipelineAdvance>) {
                return "pipeline = " + x.pipeline + ", deliver_to = " + x.deliver_to;
            } else if constexpr (std::is_same_v<R, PipelineAppend>) {
                return "pipeline = " + x.pipeline + ", quantity = " + expr(x.quantity) + ", delay = " + expr(x.delay);
            } else if constexpr (std::is_same_v<R, QueueService>) {
                return "inventory = " + x.inventory + ", backlog = " + x.backlog + ", demand = " + sampler(x.demand);
            } else if constexpr (std::is_same_v<R, RecordCountdown>) {
                std::string s = "records = " + x.records + ", timer = " + x.timer;
                if (!x.age.empty()) s += ", age = " + x.age;
                return s + ", bed = " + x.bed + ", occupancy = " + occupancy(x.occupancy);
            } else if constexpr (std::is_same_v<R, RecordHazard>) {
                return "records = " + x.records + ", prob = " + expr(x.prob) + ", bed = " + x.bed +
                       ", occupancy = " + occupancy(x.occupancy);
            } else if constexpr (std::is_same_v<R, RecordSpawn>) {
                std::string s = "records = " + x.records + ", count = " + sampler(x.count) + ", attrs = {";
                for (std::size_t i = 0; i < x.attrs.size(); ++i) {
                    if (i != 0) s += ", ";
                    s += x.attrs[i].first + ": ";
                    const auto& init = x.attrs[i].second;
                    s += init.index() == 0 ? expr(std::get<0>(init)) : sampler(std::get<1>(init));
                }
                s += "}";
                if (!x.gate.empty()) {
                    s += ", gate = [";
                    for (std::size_t i = 0; i < x.gate.size(); ++i) {
                        if (i != 0) s += ", ";
                        s += "(" + x.gate[i].bed_type + ", " + x.gate[i].occupancy + ", " + expr(x.gate[i].capacity) + ")";
                    }
                    s += "]";
                }
                if (!x.bed.empty()) s += ", bed = " + x.bed;
                if (!x.overflow.empty()) s += ", overflow = " + x.overflow;
                return s;
            } else {
                return "field = " + x.field + ", expr = " + expr(x.expr);
            }
        },
        r);
    return std::string(rule_name(r)) + "(" + args + ");";
}

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
            out += c;
        } else if (c == '\n') {
            out += "\\n";
        } else {
            out += c;
        }
    }
    return out + "\"";
}

} // namespace

std::string print_expr(const Expr& e) {
    std::ostringstream os;
    print(os, e);
    return os.str();
}

std::string print_config(const StructuralConfig& c) {
    std::ostringstream os;
    os << "config " << c.name << " {\n";
    if (!c.description.empty()) os << "  description " << quoted(c.description) << ";\n";
    if (c.uses_action) os << "  action int;\n";
    os << "  params {\n";
    for (const auto& p : c.params) {
        os << "    " << p.name << " = " << number(p.default_value) << " in [" << number(p.min) << ", " << number(p.max)
           << "];\n";
    }
    os << "  }\n  state {\n";
    for (const auto& f : c.state) {
        os << "    " << f.name << " : ";
        switch (f.kind) {
        case ValueKind::Int: os << "int = " << number(f.init.number); break;
        case ValueKind::Float: os << "float = " << number(f.init.number); break;
        case ValueKind::Pipeline: {
            os << "pipeline = [";
            for (std::size_t i = 0; i < f.init.pipeline.size(); ++i) {
                if (i != 0) os << ", ";
                os << "(" << f.init.pipeline[i].quantity << ", " << f.init.pipeline[i].timer << ")";
            }
            os << "]";
            break;
        }
        case ValueKind::Records: {
            os << "records(";
            for (std::size_t i = 0; i < f.record_schema.attrs.size(); ++i) {
                if (i != 0) os << ", ";
                os << f.record_schema.attrs[i].first << ": " << to_string(f.record_schema.attrs[i].second);
            }
            os << ") = []";
            break;
        }
        }
        os << ";\n";
    }
    os << "  }\n  rules {\n";
    for (const auto& r : c.rules) os << "    " << rule(r) << "\n";
    os << "  }\n}\n";
    return os.str();
}

} // namespace gsim::dsl
