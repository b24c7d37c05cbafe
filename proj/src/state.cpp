#include "gsim/state.hpp"

#include "gsim/errors.hpp"
#include "gsim/rng.hpp"

#include <algorithm>
#include <numeric>

namespace gsim {

std::string_view to_string(AttrKind kind) noexcept {
    switch (kind) {
    case AttrKind::Int: return "int";
    case AttrKind::Float: return "float";
    case AttrKind::Bool: return "bool";
    case AttrKind::Symbol: return "symbol";
    }
    return "?";
}

std::optional<AttrKind> attr_kind_from(std::string_view name) noexcept {
    if (name == "int") return AttrKind::Int;
    if (name == "float") return AttrKind::Float;
    if (name == "bool") return AttrKind::Bool;
    if (name == "symbol") return AttrKind::Symbol;
    return std::nullopt;
}

AttrKind kind_of(const AttrValue& value) noexcept {
    switch (value.index()) {
    case 0: return AttrKind::Int;
    case 1: return AttrKind::Float;
    case 2: return AttrKind::Bool;
    default: return AttrKind::Symbol;
    }
}

double attr_as_double(const AttrValue& value) {
    if (const auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&value)) return *d;
    if (const auto* b = std::get_if<bool>(&value)) return *b ? 1.0 : 0.0;
    throw EvalError("symbol attribute has no numeric value");
}

std::optional<std::size_t> RecordSchema::index_of(std::string_view name) const noexcept {
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        if (attrs[i].first == name) return i;
    }
    return std::nullopt;
}

void RecordList::push_back(std::vector<AttrValue> row) {
    if (row.size() != schema_->size()) throw SchemaError("record arity does not match schema");
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (kind_of(row[i]) != schema_->attrs[i].second) {
            throw SchemaError("record attribute '" + schema_->attrs[i].first + "' has wrong kind");
        }
    }
    for (auto& cell : row) cells_.push_back(std::move(cell));
}

void RecordList::retain(const std::vector<bool>& keep) {
    const std::size_t width = schema_->size();
    std::size_t out = 0;
    for (std::size_t r = 0; r < keep.size(); ++r) {
        if (!keep[r]) continue;
        if (out != r) {
            std::move(cells_.begin() + static_cast<std::ptrdiff_t>(r * width),
                      cells_.begin() + static_cast<std::ptrdiff_t>((r + 1) * width),
                      cells_.begin() + static_cast<std::ptrdiff_t>(out * width));
        }
        ++out;
    }
    cells_.resize(out * width);
}

ValueKind kind_of(const StateValue& value) noexcept {
    return static_cast<ValueKind>(value.index());
}

std::string_view to_string(ValueKind kind) noexcept {
    switch (kind) {
    case ValueKind::Int: return "int";
    case ValueKind::Float: return "float";
    case ValueKind::Pipeline: return "pipeline";
    case ValueKind::Records: return "records";
    }
    return "?";
}

std::int64_t pipeline_total(const Pipeline& pipeline) noexcept {
    std::int64_t total = 0;
    for (const auto& entry : pipeline) total += entry.quantity;
    return total;
}

double numeric_view(const StateValue& value) noexcept {
    switch (value.index()) {
    case 0: return static_cast<double>(std::get<0>(value));
    case 1: return std::get<1>(value);
    case 2: return static_cast<double>(pipeline_total(std::get<2>(value)));
    default: return static_cast<double>(std::get<3>(value).size());
    }
}

void SystemState::set(std::string_view name, StateValue value) {
    for (std::size_t i = 0; i < names_->size(); ++i) {
        if ((*names_)[i] == name) {
            values_[i] = std::move(value);
            return;
        }
    }
    auto names = std::make_shared<std::vector<std::string>>(*names_);
    names->emplace_back(name);
    names_ = std::move(names);
    values_.push_back(std::move(value));
}

const StateValue* SystemState::find(std::string_view name) const noexcept {
    for (std::size_t i = 0; i < names_->size(); ++i) {
        if ((*names_)[i] == name) return &values_[i];
    }
    return nullptr;
}

StateValue* SystemState::find(std::string_view name) noexcept {
    for (std::size_t i = 0; i < names_->size(); ++i) {
        if ((*names_)[i] == name) return &values_[i];
    }
    return nullptr;
}

const StateValue& SystemState::at(std::string_view name) const {
    if (const auto* v = find(name)) return *v;
    throw SchemaError("state has no field '" + std::string(name) + "'");
}

StateValue& SystemState::at(std::string_view name) {
    if (auto* v = find(name)) return *v;
    throw SchemaError("state has no field '" + std::string(name) + "'");
}

std::int64_t SystemState::get_int(std::string_view name) const {
    const auto& v = at(name);
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    throw SchemaError("field '" + std::string(name) + "' is not an int");
}

std::span<const std::string> SystemState::names() const noexcept {
    return {names_->data(), names_->size()};
}

SystemState SystemState::from_parts(std::shared_ptr<const std::vector<std::string>> names,
                                    std::vector<StateValue> values) {
    if (names->size() != values.size()) throw SchemaError("state name/value arity mismatch");
    SystemState s;
    s.names_ = std::move(names);
    s.values_ = std::move(values);
    return s;
}

bool operator==(const SystemState& a, const SystemState& b) {
    if (a.values_ != b.values_) return false;
    return a.names_ == b.names_ || *a.names_ == *b.names_;
}

std::vector<Action> Trajectory::actions() const {
    std::vector<Action> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.action);
    return out;
}

std::vector<std::string> ProjectionSpec::names() const {
    std::vector<std::string> out;
    out.reserve(dims.size());
    for (const auto& d : dims) out.push_back(d.name);
    return out;
}

namespace {

double extract(const StateValue& v, const ScalarField& rule) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    throw SchemaError("field '" + rule.field + "' is not a scalar");
}

double extract(const StateValue& v, const ListTotal& rule) {
    if (const auto* p = std::get_if<Pipeline>(&v)) return static_cast<double>(pipeline_total(*p));
    if (const auto* r = std::get_if<RecordList>(&v)) return static_cast<double>(r->size());
    throw SchemaError("field '" + rule.field + "' is not a list");
}

double extract(const StateValue& v, const RecordCount& rule) {
    const auto* records = std::get_if<RecordList>(&v);
    if (records == nullptr) throw SchemaError("field '" + rule.field + "' is not a record list");
    if (rule.attr.empty()) return static_cast<double>(records->size());
    const auto idx = records->schema().index_of(rule.attr);
    if (!idx) {
        // an empty list built without a schema has nothing to count
        if (records->empty()) return 0.0;
        throw SchemaError("records '" + rule.field + "' have no attribute '" + rule.attr + "'");
    }
    std::size_t count = 0;
    for (std::size_t r = 0; r < records->size(); ++r) {
        if (records->row(r)[*idx] == rule.equals) ++count;
    }
    return static_cast<double>(count);
}

} // namespace

std::vector<double> observe(const SystemState& state, const ProjectionSpec& projection) {
    std::vector<double> out;
    out.reserve(projection.dims.size());
    for (const auto& dim : projection.dims) {
        out.push_back(std::visit([&](const auto& rule) { return extract(state.at(rule.field), rule); }, dim.rule));
    }
    return out;
}

void Observer::observe_into(const SystemState& state, std::span<double> out) {
    if (state.name_table() != table_) {
        table_ = state.name_table();
        index_.clear();
        for (const auto& dim : projection_->dims) {
            const std::string& field = std::visit([](const auto& r) -> const std::string& { return r.field; }, dim.rule);
            std::size_t i = 0;
            while (i < state.size() && state.name(i) != field) ++i;
            if (i == state.size()) {
                table_.reset();
                throw SchemaError("state has no field '" + field + "'");
            }
            index_.push_back(i);
        }
    }
    for (std::size_t k = 0; k < index_.size(); ++k) {
        const StateValue& v = state.value(index_[k]);
        out[k] = std::visit([&](const auto& rule) { return extract(v, rule); }, projection_->dims[k].rule);
    }
}

std::string_view to_string(Split split) noexcept {
    switch (split) {
    case Split::Unlabeled: return "none";
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "none";
}

std::optional<Split> split_from(std::string_view name) noexcept {
    if (name == "none") return Split::Unlabeled;
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    return std::nullopt;
}

Dataset Dataset::subset(Split split) const {
    Dataset out;
    out.env_name = env_name;
    out.projection = projection;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        if (splits[i] == split) out.push_back(trajectories[i], split);
    }
    return out;
}

void Dataset::push_back(Trajectory trajectory, Split split) {
    trajectories.push_back(std::move(trajectory));
    splits.push_back(split);
}

Dataset split_dataset(const Dataset& dataset, std::size_t n_train, std::size_t n_val, std::size_t n_test,
                      std::uint64_t seed) {
    const std::size_t requested = n_train + n_val + n_test;
    if (requested > dataset.size()) {
        throw SizeError("split requests " + std::to_string(requested) + " trajectories but dataset has " +
                        std::to_string(dataset.size()));
    }
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    RngStream rng(seed, {0x5u});
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(order[i - 1], order[j]);
    }
    Dataset out = dataset;
    std::fill(out.splits.begin(), out.splits.end(), Split::Unlabeled);
    for (std::size_t k = 0; k < requested; ++k) {
        out.splits[order[k]] = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
    }
    return out;
}

} // namespace gsim
