#pragma once

#include "gsim/state.hpp"

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gsim::dsl {

// ---------------------------------------------------------------------------
// Expressions

enum class ExprKind {
    Literal,
    Param,
    Field,
    Attr,
    Action,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Exp,
    Log,
    Pow,
    Min,
    Max,
    Clip,
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable expression tree node. `name` is set for Param/Field/Attr, `value` for Literal.
struct Expr {
    ExprKind kind = ExprKind::Literal;
    double value = 0.0;
    std::string name;
    std::vector<ExprPtr> args;

    static ExprPtr literal(double v);
    static ExprPtr param(std::string name);
    static ExprPtr field(std::string name);
    static ExprPtr attr(std::string name);
    static ExprPtr action();
    static ExprPtr unary(ExprKind kind, ExprPtr a);
    static ExprPtr binary(ExprKind kind, ExprPtr a, ExprPtr b);
    static ExprPtr call(ExprKind kind, std::vector<ExprPtr> args);
};

/// Structural equality (doubles compared with ==).
[[nodiscard]] bool equal(const ExprPtr& a, const ExprPtr& b);

/// Result of x log(x <= 0) in the total-function arithmetic.
inline constexpr double kLogSentinel = -1e9;

/// Values an expression may read.
struct Bindings {
    std::span<const std::string> param_names;
    std::span<const double> params;
    const SystemState* state = nullptr;
    const RecordSchema* record_schema = nullptr;
    std::span<const AttrValue> record;
    Action action;
};

/// Evaluates with total-function arithmetic: x/0 -> 0, log(x<=0) -> kLogSentinel,
/// pow(negative, fractional) -> 0, NaN results -> 0. Throws EvalError for unbound names.
[[nodiscard]] double eval_expr(const Expr& expr, const Bindings& bindings);

// Shared arithmetic used by both the tree evaluator and the compiled interpreter.
[[nodiscard]] double safe_div(double a, double b) noexcept;
[[nodiscard]] double safe_log(double a) noexcept;
[[nodiscard]] double safe_pow(double a, double b) noexcept;
[[nodiscard]] double clip(double x, double lo, double hi) noexcept;
[[nodiscard]] double sanitize(double x) noexcept;

// ---------------------------------------------------------------------------
// Count samplers

struct Binomial {
    ExprPtr n, p;
};
struct Poisson {
    ExprPtr rate;
};
struct NegBinomial {
    ExprPtr mean, dispersion;
};
/// Truncates mean + stdev*z toward zero, then floors the result at `floor`.
struct Normal {
    ExprPtr mean, stdev;
    std::int64_t floor = 0;
};
/// Rounds the (nonnegative-clipped) value to the nearest integer.
struct Deterministic {
    ExprPtr value;
};
using CountSampler = std::variant<Binomial, Poisson, NegBinomial, Normal, Deterministic>;

[[nodiscard]] bool equal(const CountSampler& a, const CountSampler& b);

// ---------------------------------------------------------------------------
// Update rules

struct CompartmentFlow {
    std::string from, to;
    CountSampler count;
};
struct Accumulate {
    std::string field;
    CountSampler delta;
    int sign = 1;
};
struct PipelineAdvance {
    std::string pipeline, deliver_to;
};
struct PipelineAppend {
    std::string pipeline;
    ExprPtr quantity, delay;
};
struct QueueService {
    std::string inventory, backlog;
    CountSampler demand;
};
/// Bed symbol -> occupancy field.
using OccupancyMap = std::vector<std::pair<std::string, std::string>>;
struct RecordCountdown {
    std::string records, timer;
    std::string age;  // optional attr incremented alongside the countdown
    std::string bed;  // symbol attr naming the occupied bed type
    OccupancyMap occupancy;
};
struct RecordHazard {
    std::string records;
    ExprPtr prob;
    std::string bed;
    OccupancyMap occupancy;
};
struct GateOption {
    std::string bed_type, occupancy;
    ExprPtr capacity;
};
using AttrInit = std::variant<ExprPtr, CountSampler>;
struct RecordSpawn {
    std::string records;
    CountSampler count;
    std::vector<std::pair<std::string, AttrInit>> attrs;
    std::vector<GateOption> gate; // empty: admit unconditionally
    std::string bed;              // attr receiving the admitted bed symbol
    std::string overflow;         // optional int field counting rejected arrivals
};
struct Assign {
    std::string field;
    ExprPtr expr;
};

using UpdateRule = std::variant<CompartmentFlow, Accumulate, PipelineAdvance, PipelineAppend, QueueService,
                                RecordCountdown, RecordHazard, RecordSpawn, Assign>;

[[nodiscard]] std::string_view rule_name(const UpdateRule& rule) noexcept;
[[nodiscard]] bool equal(const UpdateRule& a, const UpdateRule& b);

// ---------------------------------------------------------------------------
// Config

struct ParameterDecl {
    std::string name;
    double default_value = 0.0;
    double min = 0.0;
    double max = 0.0;
    friend bool operator==(const ParameterDecl&, const ParameterDecl&) = default;
};

/// Initial value of a state field: a number for scalars, a literal entry list for pipelines,
/// empty for record lists.
struct FieldInit {
    double number = 0.0;
    Pipeline pipeline;
    friend bool operator==(const FieldInit&, const FieldInit&) = default;
};

struct FieldDecl {
    std::string name;
    ValueKind kind = ValueKind::Int;
    RecordSchema record_schema; // only for Records
    FieldInit init;
    friend bool operator==(const FieldDecl&, const FieldDecl&) = default;
};

struct StructuralConfig {
    std::string name;
    std::string description;
    bool uses_action = false;
    std::vector<ParameterDecl> params;
    std::vector<FieldDecl> state;
    std::vector<UpdateRule> rules;

    [[nodiscard]] std::optional<std::size_t> param_index(std::string_view name) const noexcept;
    [[nodiscard]] std::optional<std::size_t> field_index(std::string_view name) const noexcept;
    [[nodiscard]] std::vector<std::string> param_names() const;
    [[nodiscard]] std::vector<double> defaults() const;
    [[nodiscard]] std::vector<double> lower_bounds() const;
    [[nodiscard]] std::vector<double> upper_bounds() const;
    /// State built from the declared initial-value rules.
    [[nodiscard]] SystemState initial_state() const;
};

[[nodiscard]] bool equal(const StructuralConfig& a, const StructuralConfig& b);

/// Flat parameter values aligned with a config's declarations; values are clipped into
/// the declared [min, max] when set.
class ParameterVector {
  public:
    ParameterVector() = default;
    explicit ParameterVector(const StructuralConfig& config);
    ParameterVector(const StructuralConfig& config, std::span<const double> values);

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
    void set(std::size_t i, double value);
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }
    [[nodiscard]] std::span<const double> lower() const noexcept { return lower_; }
    [[nodiscard]] std::span<const double> upper() const noexcept { return upper_; }
    [[nodiscard]] std::optional<double> get(std::string_view name) const;

    friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

  private:
    std::vector<std::string> names_;
    std::vector<double> values_;
    std::vector<double> lower_;
    std::vector<double> upper_;
};

// ---------------------------------------------------------------------------
// Text <-> AST

/// Parses one `config <name> { ... }` block. Throws ParseError (with line/column) on
/// lexical or grammar errors and on duplicate declarations.
[[nodiscard]] StructuralConfig parse_config(std::string_view text);

/// Canonical text; parse_config(print_config(c)) is structurally equal to c.
[[nodiscard]] std::string print_config(const StructuralConfig& config);
[[nodiscard]] std::string print_expr(const Expr& expr);

// ---------------------------------------------------------------------------
// Validation

enum class Severity { Warning, Error };

struct Issue {
    Severity severity = Severity::Error;
    std::string message;
    std::string location;
};

struct ValidationReport {
    std::vector<Issue> issues;
    [[nodiscard]] bool ok() const noexcept;
    [[nodiscard]] std::string summary() const;
};

[[nodiscard]] ValidationReport validate(const StructuralConfig& config);

} // namespace gsim::dsl
