#include "lanfit/model.hpp"

#include <cmath>

namespace lanfit {

bool ModelSpec::has_negative_rate() const {
    for (double v : a)
        if (v < 0) return true;
    for (double v : b)
        if (v < 0) return true;
    return false;
}

void ModelSpec::validate(bool require_nonnegative_rates) const {
    const std::size_t f = categories.size();
    if (f == 0) throw ValidationError("model needs at least one category");
    auto check_vec = [&](const std::vector<double>& v, const char* name) {
        if (v.size() != f) {
            throw ValidationError(std::string("model field '") + name +
                                  "' must have one entry per category");
        }
        for (double x : v) {
            if (!std::isfinite(x)) {
                throw ValidationError(std::string("non-finite model parameter in '") +
                                      name + "'");
            }
        }
    };
    check_vec(p, "p");
    check_vec(q, "q");
    check_vec(a, "a");
    check_vec(b, "b");
    if (y_exponents) {
        check_vec(y_exponents->p, "y_exponents.p");
        check_vec(y_exponents->q, "y_exponents.q");
    }
    if (require_nonnegative_rates && has_negative_rate()) {
        throw ValidationError("negative attrition rate");
    }
    if (!(time_step > 0.0) || !std::isfinite(time_step)) {
        throw ValidationError("time step must be positive");
    }
    for (std::size_t i = 0; i < f; ++i) {
        for (std::size_t j = i + 1; j < f; ++j) {
            if (categories[i] == categories[j]) {
                throw ValidationError("duplicate category label '" + categories[i] + "'");
            }
        }
    }
}

double pow_strength(double strength, double exponent) {
    if (strength < 0.0) throw DomainError("negative strength");
    if (strength == 0.0) {
        if (exponent == 0.0) return 1.0;
        if (exponent < 0.0) {
            throw DomainError("zero strength raised to a negative exponent");
        }
        return 0.0;
    }
    return std::pow(strength, exponent);
}

DayLosses loss_rates(const ModelSpec& model,
                     std::span<const double> x_strengths,
                     std::span<const double> y_strengths) {
    model.validate(false);
    const std::size_t f = model.force_count();
    if (x_strengths.size() != f || y_strengths.size() != f) {
        throw ValidationError("strength vectors must have one entry per category");
    }
    for (std::size_t i = 0; i < f; ++i) {
        if (!std::isfinite(x_strengths[i]) || x_strengths[i] < 0.0 ||
            !std::isfinite(y_strengths[i]) || y_strengths[i] < 0.0) {
            throw DomainError("negative strength");
        }
    }
    auto target = [&]() -> std::size_t {
        for (std::size_t i = 0; i < f; ++i) {
            if (model.categories[i] == model.target_category) return i;
        }
        throw ValidationError("target category '" + model.target_category +
                              "' is not among the model categories");
    }();

    const double x_target = x_strengths[target];
    const double y_target = y_strengths[target];
    const auto& py = model.p_for_y();
    const auto& qy = model.q_for_y();

    DayLosses out;
    out.x_components.resize(f);
    out.y_components.resize(f);
    for (std::size_t i = 0; i < f; ++i) {
        out.x_components[i] =
            model.a[i] * pow_strength(x_target, model.q[i]) *
            pow_strength(y_strengths[i], model.p[i]);
        out.y_components[i] =
            model.b[i] * pow_strength(y_target, qy[i]) *
            pow_strength(x_strengths[i], py[i]);
        out.x_total += out.x_components[i];
        out.y_total += out.y_components[i];
    }
    return out;
}

LossBreakdown predict_series(const ModelSpec& model, const BattleSeries& series) {
    const std::size_t f = model.force_count();
    std::vector<std::size_t> cat_idx(f);
    for (std::size_t i = 0; i < f; ++i) {
        auto idx = series.category_index(model.categories[i]);
        if (!idx) {
            throw ValidationError("model category '" + model.categories[i] +
                                  "' not present in series");
        }
        cat_idx[i] = *idx;
    }

    LossBreakdown out;
    out.days = series.days();
    out.categories = model.categories;
    std::vector<double> xs(f), ys(f);
    for (std::size_t t = 0; t < series.n_days(); ++t) {
        for (std::size_t i = 0; i < f; ++i) {
            xs[i] = series.on_hand(Side::X, cat_idx[i], t);
            ys[i] = series.on_hand(Side::Y, cat_idx[i], t);
        }
        DayLosses day = loss_rates(model, xs, ys);
        out.x_total.push_back(day.x_total);
        out.y_total.push_back(day.y_total);
        out.x_components.push_back(std::move(day.x_components));
        out.y_components.push_back(std::move(day.y_components));
    }
    return out;
}

double state_ratio(double p, double q, double x0, double y0, double xt, double yt) {
    for (double v : {x0, y0, xt, yt}) {
        if (!std::isfinite(v) || v < 0.0) throw DomainError("negative strength");
    }
    const double num = pow_strength(y0, p) * pow_strength(x0, q) -
                       pow_strength(yt, p) * pow_strength(xt, q);
    const double den = pow_strength(x0, p) * pow_strength(y0, q) -
                       pow_strength(xt, p) * pow_strength(yt, q);
    if (den == 0.0) {
        throw DomainError("state ratio undefined: powered-strength difference vanishes");
    }
    return num / den;
}

bool victory_check(double p, double q, double x0, double y0, double xt, double yt,
                   double a, double b) {
    if (!(a > 0.0)) throw DomainError("victory check requires a > 0");
    if (b < 0.0) throw DomainError("negative attrition rate");
    return state_ratio(p, q, x0, y0, xt, yt) >= b / a;
}

PoweredState closed_form_trajectory(double p, double q, double a, double b,
                                    double x0, double y0, double t) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw DomainError("closed-form trajectory requires positive attrition rates");
    }
    if (!(x0 > 0.0) || !(y0 > 0.0)) {
        throw DomainError("closed-form trajectory requires positive initial strengths");
    }
    const double xp0 = pow_strength(x0, p);
    const double yq0 = pow_strength(y0, q);
    const double root_ab = std::sqrt(a * b);
    const double grow = std::exp(t * root_ab);
    const double decay = std::exp(-t * root_ab);

    PoweredState st;
    st.x_pow = 0.5 * (xp0 - yq0 * std::sqrt(a / b)) * grow +
               0.5 * (xp0 + yq0 * std::sqrt(a / b)) * decay;
    st.y_pow = 0.5 * (yq0 - xp0 * std::sqrt(b / a)) * grow +
               0.5 * (yq0 + xp0 * std::sqrt(b / a)) * decay;
    return st;
}

ModelSpec homogeneous_preset(HomogeneousLaw law) {
    ModelSpec m;
    m.categories = {"tank"};
    m.target_category = "tank";
    m.a = {0.0};
    m.b = {0.0};
    switch (law) {
    case HomogeneousLaw::linear:
        m.p = {1.0};
        m.q = {1.0};
        break;
    case HomogeneousLaw::square:
        m.p = {0.0};
        m.q = {1.0};
        break;
    case HomogeneousLaw::ambush:
        // Area-fire attacker (linear form) against an aimed-fire defender.
        m.p = {1.0};
        m.q = {1.0};
        m.y_exponents = SideExponents{{1.0}, {0.0}};
        break;
    }
    return m;
}

ModelSpec homogeneous_preset(std::string_view name) {
    if (name == "linear") return homogeneous_preset(HomogeneousLaw::linear);
    if (name == "square") return homogeneous_preset(HomogeneousLaw::square);
    if (name == "ambush") return homogeneous_preset(HomogeneousLaw::ambush);
    throw ValidationError("unknown preset '" + std::string(name) +
                          "' (expected linear, square or ambush)");
}

} // namespace lanfit
