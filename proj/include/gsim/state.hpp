#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace gsim {

struct QuantityTimer {
    std::int64_t quantity = 0;
    std::int64_t timer = 0;
    friend bool operator==(const QuantityTimer&, const QuantityTimer&) = default;
};

using Pipeline = std::vector<QuantityTimer>;

enum class AttrKind { Int, Float, Bool, Symbol };

using AttrValue = std::variant<std::int64_t, double, bool, std::string>;

[[nodiscard]] std::string_view to_string(AttrKind kind) noexcept;
[[nodiscard]] std::optional<AttrKind> attr_kind_from(std::string_view name) noexcept;
[[nodiscard]] AttrKind kind_of(const AttrValue& value) noexcept;
/// Numeric view of an attribute: bool -> 0/1, symbol -> error.
[[nodiscard]] double attr_as_double(const AttrValue& value);

struct RecordSchema {
    std::vector<std::pair<std::string, AttrKind>> attrs;

    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view name) const noexcept;
    [[nodiscard]] std::size_t size() const noexcept { return attrs.size(); }
    friend bool operator==(const RecordSchema&, const RecordSchema&) = default;
};

/// Homogeneous list of attribute records stored row-major in one flat buffer.
class RecordList {
  public:
    RecordList() : schema_(std::make_shared<const RecordSchema>()) {}
    explicit RecordList(std::shared_ptr<const RecordSchema> schema) : schema_(std::move(schema)) {}

    [[nodiscard]] const RecordSchema& schema() const noexcept { return *schema_; }
    [[nodiscard]] const std::shared_ptr<const RecordSchema>& schema_ptr() const noexcept { return schema_; }
    [[nodiscard]] std::size_t size() const noexcept {
        return schema_->size() == 0 ? 0 : cells_.size() / schema_->size();
    }
    [[nodiscard]] bool empty() const noexcept { return cells_.empty(); }

    [[nodiscard]] std::span<const AttrValue> row(std::size_t i) const {
        return {cells_.data() + i * schema_->size(), schema_->size()};
    }
    [[nodiscard]] std::span<AttrValue> row(std::size_t i) {
        return {cells_.data() + i * schema_->size(), schema_->size()};
    }
    /// Appends a row; throws SchemaError on arity or kind mismatch.
    void push_back(std::vector<AttrValue> row);
    /// Keeps rows for which keep[i] is true, preserving order.
    void retain(const std::vector<bool>& keep);

    friend bool operator==(const RecordList& a, const RecordList& b) {
        return *a.schema_ == *b.schema_ && a.cells_ == b.cells_;
    }

  private:
    std::shared_ptr<const RecordSchema> schema_;
    std::vector<AttrValue> cells_;
};

using StateValue = std::variant<std::int64_t, double, Pipeline, RecordList>;

enum class ValueKind { Int, Float, Pipeline, Records };
[[nodiscard]] ValueKind kind_of(const StateValue& value) noexcept;
[[nodiscard]] std::string_view to_string(ValueKind kind) noexcept;

/// Scalar reading of a state value as used by expressions: ints and floats as-is,
/// pipelines as their total quantity, record lists as their row count.
[[nodiscard]] double numeric_view(const StateValue& value) noexcept;
[[nodiscard]] std::int64_t pipeline_total(const Pipeline& pipeline) noexcept;

/// Ordered map field-name -> value. Field names are shared between copies, so
/// stepping a simulator only copies values.
class SystemState {
  public:
    SystemState() = default;

    /// Appends a new field or replaces an existing one (keeping its position).
    void set(std::string_view name, StateValue value);

    [[nodiscard]] const StateValue* find(std::string_view name) const noexcept;
    [[nodiscard]] StateValue* find(std::string_view name) noexcept;
    /// Throws SchemaError if the field is absent.
    [[nodiscard]] const StateValue& at(std::string_view name) const;
    [[nodiscard]] StateValue& at(std::string_view name);
    [[nodiscard]] std::int64_t get_int(std::string_view name) const;

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] const std::string& name(std::size_t i) const { return (*names_)[i]; }
    [[nodiscard]] const StateValue& value(std::size_t i) const { return values_[i]; }
    [[nodiscard]] StateValue& value(std::size_t i) { return values_[i]; }
    [[nodiscard]] std::span<const std::string> names() const noexcept;
    [[nodiscard]] const std::vector<StateValue>& values() const noexcept { return values_; }
    /// In-place access for interpreters; the field set itself cannot change through it.
    [[nodiscard]] std::vector<StateValue>& mutable_values() noexcept { return values_; }

    /// Builds a state over an existing name table (used by interpreters to avoid re-interning).
    static SystemState from_parts(std::shared_ptr<const std::vector<std::string>> names, std::vector<StateValue> values);
    [[nodiscard]] const std::shared_ptr<const std::vector<std::string>>& name_table() const noexcept { return names_; }

    friend bool operator==(const SystemState& a, const SystemState& b);

  private:
    std::shared_ptr<const std::vector<std::string>> names_ = std::make_shared<const std::vector<std::string>>();
    std::vector<StateValue> values_;
};

using Action = std::optional<std::int64_t>;

struct TrajectoryStep {
    Action action;
    SystemState next;
    friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct Trajectory {
    SystemState init;
    std::vector<TrajectoryStep> steps;

    [[nodiscard]] std::size_t horizon() const noexcept { return steps.size(); }
    /// State at time t (t = 0 is init).
    [[nodiscard]] const SystemState& state_at(std::size_t t) const { return t == 0 ? init : steps.at(t - 1).next; }
    [[nodiscard]] std::vector<Action> actions() const;
    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// One observation dimension: how a scalar is extracted from a state.
struct ScalarField {
    std::string field;
    friend bool operator==(const ScalarField&, const ScalarField&) = default;
};
/// Pipeline total quantity, or record count for record lists.
struct ListTotal {
    std::string field;
    friend bool operator==(const ListTotal&, const ListTotal&) = default;
};
/// Records whose attribute equals the given value (all records when attr is empty).
struct RecordCount {
    std::string field;
    std::string attr;
    AttrValue equals = true;
    friend bool operator==(const RecordCount&, const RecordCount&) = default;
};
using ExtractionRule = std::variant<ScalarField, ListTotal, RecordCount>;

struct ProjectionDim {
    std::string name;
    ExtractionRule rule;
    friend bool operator==(const ProjectionDim&, const ProjectionDim&) = default;
};

struct ProjectionSpec {
    std::vector<ProjectionDim> dims;
    [[nodiscard]] std::size_t arity() const noexcept { return dims.size(); }
    [[nodiscard]] std::vector<std::string> names() const;
    friend bool operator==(const ProjectionSpec&, const ProjectionSpec&) = default;
};

/// Projects a state onto the projection's float vector. Throws SchemaError for missing
/// fields or kind mismatches.
[[nodiscard]] std::vector<double> observe(const SystemState& state, const ProjectionSpec& projection);

/// observe() with field positions cached per state layout; for hot loops.
class Observer {
  public:
    explicit Observer(const ProjectionSpec& projection) : projection_(&projection) {}
    void observe_into(const SystemState& state, std::span<double> out);

  private:
    const ProjectionSpec* projection_;
    std::shared_ptr<const std::vector<std::string>> table_;
    std::vector<std::size_t> index_;
};

enum class Split { Unlabeled, Train, Val, Test };
[[nodiscard]] std::string_view to_string(Split split) noexcept;
[[nodiscard]] std::optional<Split> split_from(std::string_view name) noexcept;

struct Dataset {
    std::string env_name;
    ProjectionSpec projection;
    std::vector<Trajectory> trajectories;
    std::vector<Split> splits; // parallel to trajectories

    [[nodiscard]] std::size_t size() const noexcept { return trajectories.size(); }
    [[nodiscard]] std::size_t horizon() const noexcept {
        return trajectories.empty() ? 0 : trajectories.front().horizon();
    }
    /// Trajectories carrying the given label, in dataset order.
    [[nodiscard]] Dataset subset(Split split) const;
    void push_back(Trajectory trajectory, Split split = Split::Unlabeled);

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Assigns disjoint train/val/test labels using a seeded permutation; the remaining
/// trajectories become Unlabeled. Throws SizeError if the request exceeds the dataset.
[[nodiscard]] Dataset split_dataset(const Dataset& dataset, std::size_t n_train, std::size_t n_val,
                                    std::size_t n_test, std::uint64_t seed);

} // namespace gsim
