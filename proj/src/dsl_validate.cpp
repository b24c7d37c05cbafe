#include "gsim/dsl.hpp"

#include <set>

namespace gsim::dsl {

namespace {

class Validator {
  public:
    explicit Validator(const StructuralConfig& c) : c_(c) {}

    ValidationReport run() {
        std::set<std::string> seen;
        for (const auto& p : c_.params) {
            const std::string loc = "params." + p.name;
            if (!seen.insert(p.name).second) error("duplicate parameter '" + p.name + "'", loc);
            if (p.min > p.max) error("parameter '" + p.name + "' has min > max", loc);
            else if (p.default_value < p.min || p.default_value > p.max)
                error("default of '" + p.name + "' lies outside [min, max]", loc);
        }
        seen.clear();
        for (const auto& f : c_.state) {
            const std::string loc = "state." + f.name;
            if (!seen.insert(f.name).second) error("duplicate field '" + f.name + "'", loc);
            if (c_.param_index(f.name)) error("field '" + f.name + "' shadows a parameter", loc);
            if ((f.kind == ValueKind::Int) && f.init.number < 0) error("negative initial count for '" + f.name + "'", loc);
            for (const auto& e : f.init.pipeline) {
                if (e.quantity < 0 || e.timer < 0) error("negative pipeline entry in '" + f.name + "'", loc);
            }
        }
        for (std::size_t k = 0; k < c_.rules.size(); ++k) {
            loc_ = "rule " + std::to_string(k) + " (" + std::string(rule_name(c_.rules[k])) + ")";
            std::visit([&](const auto& r) { check(r); }, c_.rules[k]);
        }
        for (const auto& p : c_.params) {
            if (used_params_.count(p.name) == 0) warn("parameter '" + p.name + "' is never used", "params." + p.name);
        }
        return std::move(report_);
    }

  private:
    void error(std::string msg, std::string loc) { report_.issues.push_back({Severity::Error, std::move(msg), std::move(loc)}); }
    void warn(std::string msg, std::string loc) { report_.issues.push_back({Severity::Warning, std::move(msg), std::move(loc)}); }
    void error(std::string msg) { error(std::move(msg), loc_); }

    const FieldDecl* field(const std::string& name) const {
        const auto i = c_.field_index(name);
        return i ? &c_.state[*i] : nullptr;
    }

    const FieldDecl* need_field(const std::string& name, std::initializer_list<ValueKind> kinds, const char* role) {
        const FieldDecl* f = field(name);
        if (f == nullptr) {
            error("undeclared field '" + name + "' used as " + role);
            return nullptr;
        }
        for (auto k : kinds) {
            if (f->kind == k) return f;
        }
        error("field '" + name + "' has kind " + std::string(to_string(f->kind)) + ", not valid as " + role);
        return nullptr;
    }

    void expr(const ExprPtr& e, const RecordSchema* scope) {
        if (!e) {
            error("missing expression");
            return;
        }
        switch (e->kind) {
        case ExprKind::Param:
            if (!c_.param_index(e->name)) error("undeclared parameter '" + e->name + "'");
            used_params_.insert(e->name);
            break;
        case ExprKind::Field:
            if (!field(e->name)) error("undeclared field '" + e->name + "'");
            break;
        case ExprKind::Attr:
            if (scope == nullptr) {
                error("undeclared name '" + e->name + "' (attributes are only visible inside record rules)");
            } else if (const auto i = scope->index_of(e->name); !i) {
                error("undeclared name '" + e->name + "'");
            } else if (scope->attrs[*i].second == AttrKind::Symbol) {
                error("symbol attribute '" + e->name + "' cannot be used in arithmetic");
            }
            break;
        case ExprKind::Action:
            if (!c_.uses_action) error("'action' used but the config does not declare an action input");
            break;
        default: break;
        }
        for (const auto& a : e->args) expr(a, scope);
    }

    void sampler(const CountSampler& s, const RecordSchema* scope) {
        std::visit(
            [&](const auto& x) {
                using S = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<S, Binomial>) {
                    expr(x.n, scope);
                    expr(x.p, scope);
                } else if constexpr (std::is_same_v<S, Poisson>) {
                    expr(x.rate, scope);
                } else if constexpr (std::is_same_v<S, NegBinomial>) {
                    expr(x.mean, scope);
                    expr(x.dispersion, scope);
                } else if constexpr (std::is_same_v<S, Normal>) {
                    expr(x.mean, scope);
                    expr(x.stdev, scope);
                } else {
                    expr(x.value, scope);
                }
            },
            s);
    }

    const RecordSchema* records(const std::string& name) {
        const FieldDecl* f = need_field(name, {ValueKind::Records}, "record list");
        return f != nullptr ? &f->record_schema : nullptr;
    }

    void attr(const RecordSchema* schema, const std::string& name, std::initializer_list<AttrKind> kinds, const char* role) {
        if (schema == nullptr) return;
        const auto i = schema->index_of(name);
        if (!i) {
            error("record has no attribute '" + name + "' (" + role + ")");
            return;
        }
        for (auto k : kinds) {
            if (schema->attrs[*i].second == k) return;
        }
        error("attribute '" + name + "' has the wrong kind for " + role);
    }

    void occupancy(const OccupancyMap& m) {
        std::set<std::string> beds;
        for (const auto& [bed, f] : m) {
            if (!beds.insert(bed).second) error("bed type '" + bed + "' listed twice");
            need_field(f, {ValueKind::Int}, "occupancy counter");
        }
    }

    void check(const CompartmentFlow& r) {
        need_field(r.from, {ValueKind::Int}, "flow source");
        need_field(r.to, {ValueKind::Int}, "flow target");
        if (r.from == r.to) warn("flow from a field to itself has no effect", loc_);
        sampler(r.count, nullptr);
    }
    void check(const Accumulate& r) {
        need_field(r.field, {ValueKind::Int, ValueKind::Float}, "accumulator");
        sampler(r.delta, nullptr);
    }
    void check(const PipelineAdvance& r) {
        need_field(r.pipeline, {ValueKind::Pipeline}, "pipeline");
        need_field(r.deliver_to, {ValueKind::Int}, "delivery target");
    }
    void check(const PipelineAppend& r) {
        need_field(r.pipeline, {ValueKind::Pipeline}, "pipeline");
        expr(r.quantity, nullptr);
        expr(r.delay, nullptr);
    }
    void check(const QueueService& r) {
        need_field(r.inventory, {ValueKind::Int}, "inventory");
        need_field(r.backlog, {ValueKind::Int}, "backlog");
        sampler(r.demand, nullptr);
    }
    void check(const RecordCountdown& r) {
        const RecordSchema* s = records(r.records);
        attr(s, r.timer, {AttrKind::Int}, "timer");
        if (!r.age.empty()) attr(s, r.age, {AttrKind::Int}, "age");
        attr(s, r.bed, {AttrKind::Symbol}, "bed");
        occupancy(r.occupancy);
    }
    void check(const RecordHazard& r) {
        const RecordSchema* s = records(r.records);
        expr(r.prob, s);
        attr(s, r.bed, {AttrKind::Symbol}, "bed");
        occupancy(r.occupancy);
    }
    void check(const RecordSpawn& r) {
        const RecordSchema* s = records(r.records);
        sampler(r.count, nullptr);
        std::set<std::string> assigned;
        for (const auto& [name, init] : r.attrs) {
            if (!assigned.insert(name).second) error("attribute '" + name + "' assigned twice");
            attr(s, name, {AttrKind::Int, AttrKind::Float, AttrKind::Bool}, "spawn attribute");
            if (init.index() == 0) expr(std::get<0>(init), s);
            else sampler(std::get<1>(init), s);
        }
        std::set<std::string> beds;
        for (const auto& g : r.gate) {
            if (!beds.insert(g.bed_type).second) error("bed type '" + g.bed_type + "' listed twice in gate");
            need_field(g.occupancy, {ValueKind::Int}, "occupancy counter");
            expr(g.capacity, nullptr);
        }
        if (!r.gate.empty() && r.bed.empty()) warn("gate admits patients but no bed attribute records where", loc_);
        if (!r.bed.empty()) {
            attr(s, r.bed, {AttrKind::Symbol}, "bed");
            if (assigned.count(r.bed) != 0) error("bed attribute '" + r.bed + "' is set by the gate, not attrs");
        }
        if (!r.overflow.empty()) need_field(r.overflow, {ValueKind::Int}, "overflow counter");
    }
    void check(const Assign& r) {
        need_field(r.field, {ValueKind::Int, ValueKind::Float}, "assignment target");
        expr(r.expr, nullptr);
    }

    const StructuralConfig& c_;
    ValidationReport report_;
    std::string loc_;
    std::set<std::string> used_params_;
};

} // namespace

ValidationReport validate(const StructuralConfig& config) { return Validator(config).run(); }

} // namespace gsim::dsl
