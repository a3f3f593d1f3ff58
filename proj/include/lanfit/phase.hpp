#ifndef LANFIT_PHASE_HPP
#define LANFIT_PHASE_HPP

#include <span>
#include <string>
#include <vector>

#include "lanfit/battle_data.hpp"
#include "lanfit/estimation.hpp"
#include "lanfit/gof.hpp"
#include "lanfit/model.hpp"

namespace lanfit {

/// Ordered, contiguous, non-overlapping day windows covering a range.
class PhasePartition {
public:
    /// Validates ordering, contiguity and coverage of the span of windows.
    static PhasePartition from_windows(std::vector<DayWindow> windows);

    const std::vector<DayWindow>& windows() const { return windows_; }
    DayWindow covered() const { return {windows_.front().first, windows_.back().last}; }
    std::size_t size() const { return windows_.size(); }

private:
    PhasePartition() = default;
    std::vector<DayWindow> windows_;
};

enum class PartitionScheme { whole, five_phase, per_day };

/// whole: one window. per_day: one singleton window per day. five_phase:
/// the historical split {[2,3],[4,6],[7,8],[9,11],[12,14]} — only defined
/// on the window [2,14].
PhasePartition make_partition(PartitionScheme scheme, DayWindow window);
PhasePartition make_partition(std::span<const DayWindow> custom);

struct PhaseFitReport {
    std::vector<FitResult> phases;
    LossBreakdown combined;          // phase fits concatenated in day order
    std::vector<double> observed_x;  // target-category losses over the window
    std::vector<double> observed_y;
    GofReport gof;                   // over all days in the partition window
    double total_objective = 0.0;    // summed SSR or summed log-likelihood
};

/// Fits each phase independently and assembles the combined fitted series
/// and its goodness-of-fit report. A failure in any phase aborts with an
/// error naming the phase window.
PhaseFitReport fit_phases(const BattleSeries& series, const ModelSpec& shape,
                          const PhasePartition& partition, const FitConfig& config);

/// One axis of a parameter-surface sweep. `name` addresses an exponent as
/// p<k> or q<k> with a 1-based category index (p1, q1, p2, ...).
struct AxisSpec {
    std::string name;
    double min = 0.0;
    double max = 0.0;
    double step = 1.0;

    std::vector<double> values() const;
};

struct SweepCell {
    double value = 0.0;
    std::vector<double> a;
    std::vector<double> b;
    bool valid = false;
    std::string error;
};

struct SweepGrid {
    std::string axis1_name;
    std::string axis2_name;
    std::vector<double> axis1_values;
    std::vector<double> axis2_values;
    Objective objective = Objective::ssr;
    std::vector<SweepCell> cells; // row-major: [i1 * axis2_values.size() + i2]

    const SweepCell& cell(std::size_t i1, std::size_t i2) const {
        return cells[i1 * axis2_values.size() + i2];
    }
};

/// Evaluates the objective over a 2-D exponent lattice. At every cell the
/// attrition rates are profiled out (exact least squares for ssr, the
/// concentrated closed form refined on the aggregate likelihood for
/// loglik); the remaining exponents come from `shape`. Cells whose
/// evaluation fails are marked invalid and kept.
SweepGrid sweep(const BattleSeries& series, const ModelSpec& shape,
                const AxisSpec& axis1, const AxisSpec& axis2, Objective objective,
                std::span<const Interval> rate_bounds = {});

} // namespace lanfit

#endif
