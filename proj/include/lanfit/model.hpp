#ifndef LANFIT_MODEL_HPP
#define LANFIT_MODEL_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lanfit/battle_data.hpp"

namespace lanfit {

/// Exponents applied to the Y-side loss equation when they differ from the
/// shared ones (area-fire attacker vs aimed-fire defender).
struct SideExponents {
    std::vector<double> p;
    std::vector<double> q;
};

/// A two-sided attrition-rate law over F shooter categories.
///
/// Daily loss rates of the target category:
///   x_loss = sum_i a[i] * X_target^q[i] * Y_i^p[i]
///   y_loss = sum_i b[i] * Y_target^q[i] * X_i^p[i]
/// where X_target / Y_target are the strengths of the side's own target
/// category and X_i / Y_i the shooter strengths of category i on the firing
/// side. q exponentiates the casualty-suffering side, p the shooters.
struct ModelSpec {
    std::vector<std::string> categories;
    std::string target_category = "tank";
    std::vector<double> p;
    std::vector<double> q;
    std::vector<double> a;
    std::vector<double> b;
    /// Present only for asymmetric laws (e.g. the guerrilla/ambush preset);
    /// otherwise the Y equation shares p and q.
    std::optional<SideExponents> y_exponents;
    /// Time between observations, in days.
    double time_step = 1.0;

    std::size_t force_count() const { return categories.size(); }

    const std::vector<double>& p_for_y() const {
        return y_exponents ? y_exponents->p : p;
    }
    const std::vector<double>& q_for_y() const {
        return y_exponents ? y_exponents->q : q;
    }

    bool has_negative_rate() const;

    /// Shape/finiteness checks. Negative rates are tolerated when
    /// `require_nonnegative_rates` is false: unconstrained least-squares
    /// fits can legitimately produce them and they remain evaluable under
    /// the squared-error objective.
    void validate(bool require_nonnegative_rates = true) const;
};

/// Loss rates for a single day, with the per-category contributions.
struct DayLosses {
    double x_total = 0.0;
    double y_total = 0.0;
    std::vector<double> x_components;
    std::vector<double> y_components;
};

/// Per-day fitted (or predicted) losses with component attribution.
struct LossBreakdown {
    std::vector<int> days;
    std::vector<std::string> categories;
    std::vector<double> x_total;
    std::vector<double> y_total;
    std::vector<std::vector<double>> x_components; // [day][category]
    std::vector<std::vector<double>> y_components;
};

/// strength^exponent with the conventions 0^0 = 1 and 0^negative = error.
double pow_strength(double strength, double exponent);

/// Evaluates the loss-rate law at one set of per-category strengths
/// (aligned with model.categories; the target category must be present).
DayLosses loss_rates(const ModelSpec& model,
                     std::span<const double> x_strengths,
                     std::span<const double> y_strengths);

/// One-step-ahead prediction: applies loss_rates to each day's observed
/// strengths. Strengths come from the data; nothing is integrated.
LossBreakdown predict_series(const ModelSpec& model, const BattleSeries& series);

/// The conserved-state ratio
///   (y0^p x0^q - yt^p xt^q) / (x0^p y0^q - xt^p yt^q),
/// equal to b/a along an exact trajectory.
double state_ratio(double p, double q, double x0, double y0, double xt, double yt);

/// True when the state ratio has reached the breakpoint b/a.
bool victory_check(double p, double q, double x0, double y0, double xt, double yt,
                   double a, double b);

struct PoweredState {
    double x_pow = 0.0; // X^p(t)
    double y_pow = 0.0; // Y^q(t)
};

/// Closed-form hyperbolic trajectory of the powered strengths:
///   X^p(t) = 1/2 (x0^p - y0^q sqrt(a/b)) e^{t sqrt(ab)}
///          + 1/2 (x0^p + y0^q sqrt(a/b)) e^{-t sqrt(ab)}
/// and symmetrically for Y^q(t).
PoweredState closed_form_trajectory(double p, double q, double a, double b,
                                    double x0, double y0, double t);

enum class HomogeneousLaw { linear, square, ambush };

/// Classic single-category exponent presets; attrition rates are left at 0
/// for the caller to fill in. `ambush` sets asymmetric Y-side exponents.
ModelSpec homogeneous_preset(HomogeneousLaw law);
ModelSpec homogeneous_preset(std::string_view name);

} // namespace lanfit

#endif
