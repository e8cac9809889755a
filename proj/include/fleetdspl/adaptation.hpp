#pragma once

#include "fleetdspl/knowledge.hpp"
#include "fleetdspl/trace.hpp"
#include "fleetdspl/variability.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace fleet {

enum class GoalKind { above, below, band, feature_off };

std::string_view to_string(GoalKind kind);
std::optional<GoalKind> parse_goal_kind(std::string_view name);

/// Weighted soft goal. `variable` is used by above/below/band, `feature` by feature_off.
/// above/below use `threshold`; band uses [lo, hi]. Outside the satisfied region the
/// satisfaction falls linearly to 0 over `ramp`.
struct Goal {
    std::string id;
    double weight = 1.0;
    GoalKind kind = GoalKind::above;
    VariableName variable;
    FeatureName feature;
    double threshold = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double ramp = 1.0;

    /// Throws RangeError.
    void validate() const;
};

enum class View { current, predicted };

/// Selection-dependent corrections applied on top of the predicted view. Each term only
/// touches variables already present in that view.
///   trend:    target += per_tick · horizon
///   effect:   target += delta       when `feature` is selected
///   coupling: target += gain · base(source)   (base = predicted view before corrections)
struct Outlook {
    struct Trend {
        VariableName variable;
        double per_tick = 0.0;
    };
    struct Effect {
        FeatureName feature;
        VariableName variable;
        double delta = 0.0;
    };
    struct Coupling {
        VariableName source;
        VariableName variable;
        double gain = 0.0;
    };

    std::vector<Trend> trends;
    std::vector<Effect> effects;
    std::vector<Coupling> couplings;

    bool empty() const noexcept { return trends.empty() && effects.empty() && couplings.empty(); }

    /// The predicted view of `ec` as it would look under `sel`.
    std::map<VariableName, double> project(const EvaluationContext& ec, const Selection& sel) const;
};

struct GoalEval {
    double satisfaction = 0.0;
    bool unknown = false; // variable absent from the view
    bool stale = false;   // variable stale in the current view
};

GoalEval evaluate_goal(const Goal& goal, const EvaluationContext& ec, View view, const Selection& sel,
                       const Outlook& outlook = {});

struct Scores {
    double current = 1.0;
    double predicted = 1.0;
    double effective = 1.0;
};

/// Weighted means over both views, blended as alpha·current + (1−alpha)·predicted.
/// An empty goal list (or zero total weight) scores 1.
Scores score(const Selection& sel, const EvaluationContext& ec, const std::vector<Goal>& goals, double alpha,
             const Outlook& outlook = {});

struct LoopSettings {
    Tick period = 5;
    double epsilon = 0.05;
    double alpha = 0.5;
    Tick horizon = 24;
    Tick staleness = 10;
    double violation_threshold = 0.6;
    Tick ack_timeout = 2;
    double battery_floor = kDefaultBatteryFloor;

    /// Throws RangeError.
    void validate() const;
};

struct ViolationRecord {
    enum class Kind { goal, infeasibility, staleness };
    Kind kind = Kind::goal;
    std::string subject; // goal id, device id or variable name
    double value = 0.0;  // goal satisfaction, or variable age for staleness

    bool operator==(const ViolationRecord&) const = default;
};

std::string_view to_string(ViolationRecord::Kind kind);

struct SatisfactionReport {
    EvaluationContext context;
    std::map<std::string, double> per_goal;           // current view
    std::map<std::string, double> per_goal_predicted; // predicted view, current selection
    std::set<std::string> unknown_goals;
    double total_current = 1.0;
    double total_predicted = 1.0;
    double effective = 1.0;
    std::vector<ViolationRecord> violations;
};

SatisfactionReport analyze(const KnowledgeBase& kb, const FeatureModel& model, const std::vector<Goal>& goals,
                           const FConfig& current, const LoopSettings& settings, Tick now,
                           const Outlook& outlook = {});

struct Command {
    enum class Action { activate, deactivate, configure };
    Action action = Action::activate;
    DeviceId device;
    FeatureName feature; // empty for configure
    DConfig params;

    bool operator==(const Command&) const = default;
};

std::string_view to_string(Command::Action action);

/// Deactivations of dropped bindings, then activations of new bindings, then parameter
/// updates on devices that stay bound but whose DConfig changed. Each group is ordered
/// by feature (or device) name.
std::vector<Command> plan_commands(const FConfig& from, const FConfig& to);

struct AdaptationPlan {
    FConfig target;
    ChangeSet features;
    std::vector<Command> commands;
    std::vector<ViolationRecord> reason;
    double expected_gain = 0.0;
    double target_effective = 0.0;
};

struct NoChange {
    std::string reason; // no_violation | below_hysteresis | already_optimal
    double best_gain = 0.0;
};

using PlanOutcome = std::variant<AdaptationPlan, NoChange>;

/// Exhaustive planner over the product space. Candidates are the valid selections that
/// derive against the feasible devices; the best maximises the effective score, then
/// minimises the number of changed features, then is lexicographically smallest.
/// Scores within `kScoreTolerance` of each other count as tied.
/// Throws NoFeasibleConfiguration.
PlanOutcome plan(const SatisfactionReport& report, const FeatureModel& model,
                 const std::vector<DeviceDescriptor>& registry, const std::vector<Goal>& goals,
                 const FConfig& current, const LoopSettings& settings, const Outlook& outlook = {},
                 const FeatureDefaults& defaults = {});

inline constexpr double kScoreTolerance = 1e-9;

/// Transport used by execute. Returns the tick at which the device acknowledged, or
/// nothing when no acknowledgement arrived.
class CommandBus {
public:
    virtual ~CommandBus() = default;
    virtual std::optional<Tick> dispatch(const Command& command, std::int64_t seq, Tick now) = 0;
};

struct ExecutionResult {
    bool applied = false;
    DeviceId aborted_device; // set when !applied
    std::vector<TraceEvent> events;
};

/// Sends the plan's commands in order. On success `current` becomes the plan target.
/// A command whose acknowledgement is missing or later than ack_timeout aborts the rest,
/// marks the device unreachable in `kb` and leaves `current` untouched. Deactivations
/// aimed at devices already known unreachable are skipped with a Warning.
ExecutionResult execute(const AdaptationPlan& plan, CommandBus& bus, FConfig& current, KnowledgeBase& kb,
                        const LoopSettings& settings, Tick now, std::int64_t step, std::int64_t& next_seq);

/// The MAPE-K loop bound to one fleet.
class Engine {
public:
    Engine(FeatureModel model, std::vector<Goal> goals, LoopSettings settings, KnowledgeBase kb, FConfig initial,
           Outlook outlook = {}, FeatureDefaults defaults = {});

    /// Analyze, then Plan / NoChange, then execution events when a plan exists.
    std::vector<TraceEvent> run_loop_step(Tick now, CommandBus& bus);

    KnowledgeBase& kb() noexcept { return kb_; }
    const KnowledgeBase& kb() const noexcept { return kb_; }
    const FeatureModel& model() const noexcept { return model_; }
    const std::vector<Goal>& goals() const noexcept { return goals_; }
    const LoopSettings& settings() const noexcept { return settings_; }
    const Outlook& outlook() const noexcept { return outlook_; }
    const FConfig& current() const noexcept { return current_; }
    const std::optional<SatisfactionReport>& last_report() const noexcept { return last_report_; }
    std::size_t adaptations() const noexcept { return adaptations_; }
    std::int64_t steps() const noexcept { return step_; }

private:
    FeatureModel model_;
    std::vector<Goal> goals_;
    LoopSettings settings_;
    KnowledgeBase kb_;
    FConfig current_;
    Outlook outlook_;
    FeatureDefaults defaults_;
    std::optional<SatisfactionReport> last_report_;
    std::size_t adaptations_ = 0;
    std::int64_t step_ = 0;
    std::int64_t next_seq_ = 1;
};

/// JSON forms used in trace payloads.
nlohmann::json to_json(const Selection& sel);
nlohmann::json to_json(const FConfig& cfg);
nlohmann::json to_json(const SatisfactionReport& report);
nlohmann::json to_json(const ViolationRecord& v);

} // namespace fleet
