#include "gsim/dsl.hpp"

#include "gsim/errors.hpp"

#include <algorithm>
#include <cmath>

namespace gsim::dsl {

ExprPtr Expr::literal(double v) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Literal;
    e->value = v;
    return e;
}

namespace {
ExprPtr named(ExprKind kind, std::string name) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->name = std::move(name);
    return e;
}
} // namespace

ExprPtr Expr::param(std::string name) { return named(ExprKind::Param, std::move(name)); }
ExprPtr Expr::field(std::string name) { return named(ExprKind::Field, std::move(name)); }
ExprPtr Expr::attr(std::string name) { return named(ExprKind::Attr, std::move(name)); }

ExprPtr Expr::action() {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Action;
    return e;
}

ExprPtr Expr::unary(ExprKind kind, ExprPtr a) { return call(kind, {std::move(a)}); }
ExprPtr Expr::binary(ExprKind kind, ExprPtr a, ExprPtr b) { return call(kind, {std::move(a), std::move(b)}); }

ExprPtr Expr::call(ExprKind kind, std::vector<ExprPtr> args) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->args = std::move(args);
    return e;
}

bool equal(const ExprPtr& a, const ExprPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->kind != b->kind || a->args.size() != b->args.size()) return false;
    if (a->kind == ExprKind::Literal && a->value != b->value) return false;
    if (a->name != b->name) return false;
    for (std::size_t i = 0; i < a->args.size(); ++i) {
        if (!equal(a->args[i], b->args[i])) return false;
    }
    return true;
}

double sanitize(double x) noexcept { return std::isnan(x) ? 0.0 : x; }

double safe_div(double a, double b) noexcept { return b == 0.0 ? 0.0 : sanitize(a / b); }

double safe_log(double a) noexcept { return a <= 0.0 || std::isnan(a) ? kLogSentinel : std::log(a); }

double safe_pow(double a, double b) noexcept {
    if (a < 0.0 && b != std::trunc(b)) return 0.0;
    return sanitize(std::pow(a, b));
}

double clip(double x, double lo, double hi) noexcept {
    x = sanitize(x);
    if (x < lo) return lo;
    if (x > hi) return hi;
    return x;
}

double eval_expr(const Expr& expr, const Bindings& b) {
    const auto arg = [&](std::size_t i) { return eval_expr(*expr.args.at(i), b); };
    switch (expr.kind) {
    case ExprKind::Literal: return expr.value;
    case ExprKind::Param: {
        for (std::size_t i = 0; i < b.param_names.size() && i < b.params.size(); ++i) {
            if (b.param_names[i] == expr.name) return b.params[i];
        }
        throw EvalError("unbound parameter '" + expr.name + "'");
    }
    case ExprKind::Field: {
        const StateValue* v = b.state != nullptr ? b.state->find(expr.name) : nullptr;
        if (v == nullptr) throw EvalError("unbound field '" + expr.name + "'");
        return numeric_view(*v);
    }
    case ExprKind::Attr: {
        if (b.record_schema == nullptr) throw EvalError("unbound attribute '" + expr.name + "' (no record in scope)");
        const auto idx = b.record_schema->index_of(expr.name);
        if (!idx || *idx >= b.record.size()) throw EvalError("unbound attribute '" + expr.name + "'");
        return attr_as_double(b.record[*idx]);
    }
    case ExprKind::Action:
        if (!b.action) throw EvalError("unbound action");
        return static_cast<double>(*b.action);
    case ExprKind::Neg: return -arg(0);
    case ExprKind::Add: return sanitize(arg(0) + arg(1));
    case ExprKind::Sub: return sanitize(arg(0) - arg(1));
    case ExprKind::Mul: return sanitize(arg(0) * arg(1));
    case ExprKind::Div: return safe_div(arg(0), arg(1));
    case ExprKind::Exp: return std::exp(arg(0));
    case ExprKind::Log: return safe_log(arg(0));
    case ExprKind::Pow: return safe_pow(arg(0), arg(1));
    case ExprKind::Min: return std::min(arg(0), arg(1));
    case ExprKind::Max: return std::max(arg(0), arg(1));
    case ExprKind::Clip: return clip(arg(0), arg(1), arg(2));
    }
    throw EvalError("unknown expression kind");
}

bool equal(const CountSampler& a, const CountSampler& b) {
    if (a.index() != b.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using S = std::decay_t<decltype(x)>;
            const auto& y = std::get<S>(b);
            if constexpr (std::is_same_v<S, Binomial>) {
                return equal(x.n, y.n) && equal(x.p, y.p);
            } else if constexpr (std::is_same_v<S, Poisson>) {
                return equal(x.rate, y.rate);
            } else if constexpr (std::is_same_v<S, NegBinomial>) {
                return equal(x.mean, y.mean) && equal(x.dispersion, y.dispersion);
            } else if constexpr (std::is_same_v<S, Normal>) {
                return equal(x.mean, y.mean) && equal(x.stdev, y.stdev) && x.floor == y.floor;
            } else {
                return equal(x.value, y.value);
            }
        },
        a);
}

std::string_view rule_name(const UpdateRule& rule) noexcept {
    static constexpr std::string_view names[] = {"CompartmentFlow", "Accumulate",      "PipelineAdvance",
                                                  "PipelineAppend",  "QueueService",    "RecordCountdown",
                                                  "RecordHazard",    "RecordSpawn",     "Assign"};
    return names[rule.index()];
}

namespace {

bool equal_attr_init(const AttrInit& a, const AttrInit& b) {
    if (a.index() != b.index()) return false;
    if (a.index() == 0) return equal(std::get<0>(a), std::get<0>(b));
    return equal(std::get<1>(a), std::get<1>(b));
}

} // namespace

bool equal(const UpdateRule& a, const UpdateRule& b) {
    if (a.index() != b.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using R = std::decay_t<decltype(x)>;
            const auto& y = std::get<R>(b);
            if constexpr (std::is_same_v<R, CompartmentFlow>) {
                return x.from == y.from && x.to == y.to && equal(x.count, y.count);
            } else if constexpr (std::is_same_v<R, Accumulate>) {
                return x.field == y.field && x.sign == y.sign && equal(x.delta, y.delta);
            } else if constexpr (std::is_same_v<R, PipelineAdvance>) {
                return x.pipeline == y.pipeline && x.deliver_to == y.deliver_to;
            } else if constexpr (std::is_same_v<R, PipelineAppend>) {
                return x.pipeline == y.pipeline && equal(x.quantity, y.quantity) && equal(x.delay, y.delay);
            } else if constexpr (std::is_same_v<R, QueueService>) {
                return x.inventory == y.inventory && x.backlog == y.backlog && equal(x.demand, y.demand);
            } else if constexpr (std::is_same_v<R, RecordCountdown>) {
                return x.records == y.records && x.timer == y.timer && x.age == y.age && x.bed == y.bed &&
                       x.occupancy == y.occupancy;
            } else if constexpr (std::is_same_v<R, RecordHazard>) {
                return x.records == y.records && equal(x.prob, y.prob) && x.bed == y.bed && x.occupancy == y.occupancy;
            } else if constexpr (std::is_same_v<R, RecordSpawn>) {
                if (x.records != y.records || !equal(x.count, y.count) || x.bed != y.bed || x.overflow != y.overflow)
                    return false;
                if (x.attrs.size() != y.attrs.size() || x.gate.size() != y.gate.size()) return false;
                for (std::size_t i = 0; i < x.attrs.size(); ++i) {
                    if (x.attrs[i].first != y.attrs[i].first || !equal_attr_init(x.attrs[i].second, y.attrs[i].second))
                        return false;
                }
                for (std::size_t i = 0; i < x.gate.size(); ++i) {
                    if (x.gate[i].bed_type != y.gate[i].bed_type || x.gate[i].occupancy != y.gate[i].occupancy ||
                        !equal(x.gate[i].capacity, y.gate[i].capacity))
                        return false;
                }
                return true;
            } else {
                return x.field == y.field && equal(x.expr, y.expr);
            }
        },
        a);
}

bool equal(const StructuralConfig& a, const StructuralConfig& b) {
    if (a.name != b.name || a.description != b.description || a.uses_action != b.uses_action) return false;
    if (a.params != b.params || a.state != b.state || a.rules.size() != b.rules.size()) return false;
    for (std::size_t i = 0; i < a.rules.size(); ++i) {
        if (!equal(a.rules[i], b.rules[i])) return false;
    }
    return true;
}

std::optional<std::size_t> StructuralConfig::param_index(std::string_view n) const noexcept {
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name == n) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> StructuralConfig::field_index(std::string_view n) const noexcept {
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state[i].name == n) return i;
    }
    return std::nullopt;
}

std::vector<std::string> StructuralConfig::param_names() const {
    std::vector<std::string> out;
    for (const auto& p : params) out.push_back(p.name);
    return out;
}

std::vector<double> StructuralConfig::defaults() const {
    std::vector<double> out;
    for (const auto& p : params) out.push_back(p.default_value);
    return out;
}

std::vector<double> StructuralConfig::lower_bounds() const {
    std::vector<double> out;
    for (const auto& p : params) out.push_back(p.min);
    return out;
}

std::vector<double> StructuralConfig::upper_bounds() const {
    std::vector<double> out;
    for (const auto& p : params) out.push_back(p.max);
    return out;
}

SystemState StructuralConfig::initial_state() const {
    SystemState s;
    for (const auto& f : state) {
        switch (f.kind) {
        case ValueKind::Int: s.set(f.name, static_cast<std::int64_t>(std::llround(f.init.number))); break;
        case ValueKind::Float: s.set(f.name, f.init.number); break;
        case ValueKind::Pipeline: s.set(f.name, f.init.pipeline); break;
        case ValueKind::Records: s.set(f.name, RecordList(std::make_shared<const RecordSchema>(f.record_schema))); break;
        }
    }
    return s;
}

ParameterVector::ParameterVector(const StructuralConfig& config)
    : names_(config.param_names()), values_(config.defaults()), lower_(config.lower_bounds()),
      upper_(config.upper_bounds()) {
    for (std::size_t i = 0; i < values_.size(); ++i) set(i, values_[i]);
}

ParameterVector::ParameterVector(const StructuralConfig& config, std::span<const double> values)
    : ParameterVector(config) {
    if (values.size() != values_.size()) {
        throw SizeError("parameter vector has " + std::to_string(values.size()) + " values, config declares " +
                        std::to_string(values_.size()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) set(i, values[i]);
}

void ParameterVector::set(std::size_t i, double value) {
    values_.at(i) = clip(value, lower_[i], upper_[i]);
}

std::optional<double> ParameterVector::get(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return values_[i];
    }
    return std::nullopt;
}

bool ValidationReport::ok() const noexcept {
    return std::none_of(issues.begin(), issues.end(), [](const Issue& i) { return i.severity == Severity::Error; });
}

std::string ValidationReport::summary() const {
    std::string out;
    for (const auto& i : issues) {
        if (!out.empty()) out += '\n';
        out += i.severity == Severity::Error ? "error" : "warning";
        if (!i.location.empty()) out += " [" + i.location + "]";
        out += ": " + i.message;
    }
    return out;
}

} // namespace gsim::dsl
