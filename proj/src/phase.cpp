#include "lanfit/phase.hpp"

#include <cmath>
#include <optional>

namespace lanfit {

PhasePartition PhasePartition::from_windows(std::vector<DayWindow> windows) {
    if (windows.empty()) throw ValidationError("partition needs at least one window");
    for (const auto& w : windows) {
        if (w.first > w.last) {
            throw ValidationError("window [" + std::to_string(w.first) + "," +
                                  std::to_string(w.last) + "] is empty");
        }
    }
    for (std::size_t i = 1; i < windows.size(); ++i) {
        const int expected = windows[i - 1].last + 1;
        if (windows[i].first != expected) {
            throw ValidationError(
                "partition windows must be contiguous: [" +
                std::to_string(windows[i - 1].first) + "," +
                std::to_string(windows[i - 1].last) + "] is followed by [" +
                std::to_string(windows[i].first) + "," +
                std::to_string(windows[i].last) + "]");
        }
    }
    PhasePartition p;
    p.windows_ = std::move(windows);
    return p;
}

PhasePartition make_partition(PartitionScheme scheme, DayWindow window) {
    if (window.first > window.last) throw ValidationError("empty day window");
    switch (scheme) {
    case PartitionScheme::whole:
        return PhasePartition::from_windows({window});
    case PartitionScheme::per_day: {
        std::vector<DayWindow> w;
        for (int d = window.first; d <= window.last; ++d) w.push_back({d, d});
        return PhasePartition::from_windows(std::move(w));
    }
    case PartitionScheme::five_phase:
        if (window.first != 2 || window.last != 14) {
            throw ValidationError("the five-phase split is defined on window [2,14]");
        }
        return PhasePartition::from_windows(
            {{2, 3}, {4, 6}, {7, 8}, {9, 11}, {12, 14}});
    }
    throw ValidationError("unknown partition scheme");
}

PhasePartition make_partition(std::span<const DayWindow> custom) {
    return PhasePartition::from_windows({custom.begin(), custom.end()});
}

PhaseFitReport fit_phases(const BattleSeries& series, const ModelSpec& shape,
                          const PhasePartition& partition, const FitConfig& config) {
    PhaseFitReport report;
    report.combined.categories = shape.categories;

    auto tgt = series.category_index(shape.target_category);
    if (!tgt) {
        throw ValidationError("target category '" + shape.target_category +
                              "' not present in series");
    }

    for (const auto& window : partition.windows()) {
        BattleSeries part = slice(series, window);
        FitResult result;
        try {
            result = fit(part, shape, config);
        } catch (const Error& e) {
            throw FitError("phase [" + std::to_string(window.first) + "," +
                           std::to_string(window.last) + "] failed: " + e.what());
        }
        report.total_objective += result.objective_value;
        for (std::size_t t = 0; t < part.n_days(); ++t) {
            report.combined.days.push_back(part.day(t));
            report.combined.x_total.push_back(result.fitted.x_total[t]);
            report.combined.y_total.push_back(result.fitted.y_total[t]);
            report.combined.x_components.push_back(result.fitted.x_components[t]);
            report.combined.y_components.push_back(result.fitted.y_components[t]);
            report.observed_x.push_back(part.losses(Side::X, *part.category_index(shape.target_category), t));
            report.observed_y.push_back(part.losses(Side::Y, *part.category_index(shape.target_category), t));
        }
        report.phases.push_back(std::move(result));
    }

    report.gof = gof_bundle(LossPairs{report.observed_x, report.combined.x_total,
                                      report.observed_y, report.combined.y_total});
    return report;
}

std::vector<double> AxisSpec::values() const {
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw ValidationError("axis '" + name + "': step must be positive");
    }
    if (min > max) {
        throw ValidationError("axis '" + name + "': min exceeds max");
    }
    std::vector<double> out;
    const int count = static_cast<int>(std::floor((max - min) / step + 1e-9)) + 1;
    for (int k = 0; k < count; ++k) out.push_back(min + step * k);
    return out;
}

namespace {

// "p2" -> (is_p = true, index 1)
std::pair<bool, std::size_t> parse_axis_name(const std::string& name, std::size_t F) {
    if (name.size() < 2 || (name[0] != 'p' && name[0] != 'q')) {
        throw ValidationError("axis name '" + name + "' must look like p1 or q1");
    }
    std::size_t index = 0;
    for (std::size_t i = 1; i < name.size(); ++i) {
        if (name[i] < '0' || name[i] > '9') {
            throw ValidationError("axis name '" + name + "' must look like p1 or q1");
        }
        index = index * 10 + static_cast<std::size_t>(name[i] - '0');
    }
    if (index < 1 || index > F) {
        throw ValidationError("axis '" + name + "' is out of range for " +
                              std::to_string(F) + " categories");
    }
    return {name[0] == 'p', index - 1};
}

} // namespace

SweepGrid sweep(const BattleSeries& series, const ModelSpec& shape,
                const AxisSpec& axis1, const AxisSpec& axis2, Objective objective,
                std::span<const Interval> rate_bounds) {
    const std::size_t F = shape.force_count();
    auto [is_p_1, idx1] = parse_axis_name(axis1.name, F);
    auto [is_p_2, idx2] = parse_axis_name(axis2.name, F);
    if (is_p_1 == is_p_2 && idx1 == idx2) {
        throw ValidationError("sweep axes must address distinct exponents");
    }

    SweepGrid grid;
    grid.axis1_name = axis1.name;
    grid.axis2_name = axis2.name;
    grid.axis1_values = axis1.values();
    grid.axis2_values = axis2.values();
    grid.objective = objective;
    grid.cells.resize(grid.axis1_values.size() * grid.axis2_values.size());

    ModelSpec point = shape;
    for (std::size_t i1 = 0; i1 < grid.axis1_values.size(); ++i1) {
        for (std::size_t i2 = 0; i2 < grid.axis2_values.size(); ++i2) {
            auto& target1 = is_p_1 ? point.p : point.q;
            auto& target2 = is_p_2 ? point.p : point.q;
            target1[idx1] = grid.axis1_values[i1];
            target2[idx2] = grid.axis2_values[i2];

            SweepCell& cell = grid.cells[i1 * grid.axis2_values.size() + i2];
            try {
                RateEstimates rates = profiled_rates(point, series, objective, rate_bounds);
                point.a = rates.a;
                point.b = rates.b;
                cell.value = objective == Objective::ssr
                                 ? ssr(point, series)
                                 : log_likelihood(point, series);
                cell.a = rates.a;
                cell.b = rates.b;
                cell.valid = true;
            } catch (const Error& e) {
                cell.valid = false;
                cell.error = e.what();
            }
        }
    }
    return grid;
}

} // namespace lanfit
