#ifndef LANFIT_BATTLE_DATA_HPP
#define LANFIT_BATTLE_DATA_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lanfit/errors.hpp"

namespace lanfit {

/// Two sides of an engagement. Convention throughout: X carries the
/// Soviet/Red data, Y the German/Blue data.
enum class Side { X, Y };

inline const char* side_label(Side s) { return s == Side::X ? "X" : "Y"; }

/// Closed, inclusive range of day indices.
struct DayWindow {
    int first = 0;
    int last = 0;

    int length() const { return last - first + 1; }
    bool contains(int day) const { return day >= first && day <= last; }
};

/// Daily on-hand strengths and losses for two sides across named force
/// categories. Values are immutable after construction and safe to share
/// across threads.
class BattleSeries {
public:
    struct Column {
        std::vector<double> on_hand;
        std::vector<double> losses;
    };

    /// Validates and builds a series. `x_columns`/`y_columns` are indexed
    /// by category; every vector must have one entry per day. Throws
    /// ValidationError on any inconsistency (length mismatch, negative or
    /// non-finite value, duplicate day or category label).
    static BattleSeries create(std::vector<int> days,
                               std::vector<std::string> categories,
                               std::vector<Column> x_columns,
                               std::vector<Column> y_columns);

    std::size_t n_days() const { return days_.size(); }
    std::size_t n_categories() const { return categories_.size(); }

    const std::vector<int>& days() const { return days_; }
    const std::vector<std::string>& categories() const { return categories_; }

    int day(std::size_t pos) const { return days_[pos]; }
    DayWindow full_window() const { return {days_.front(), days_.back()}; }

    std::optional<std::size_t> category_index(std::string_view label) const;
    std::optional<std::size_t> day_position(int day) const;

    double on_hand(Side side, std::size_t category, std::size_t day_pos) const {
        return column(side, category).on_hand[day_pos];
    }
    double losses(Side side, std::size_t category, std::size_t day_pos) const {
        return column(side, category).losses[day_pos];
    }

    const Column& column(Side side, std::size_t category) const {
        return sides_[side == Side::X ? 0 : 1][category];
    }

    double total_losses(Side side, std::size_t category) const;

    bool operator==(const BattleSeries&) const = default;

private:
    BattleSeries() = default;

    std::vector<int> days_;
    std::vector<std::string> categories_;
    std::array<std::vector<Column>, 2> sides_;
};

/// The embedded 14-day Kursk tank/artillery series (X = Soviets,
/// Y = Germans), as recorded in the KOSAVE/Kursk database digest.
BattleSeries kursk_dataset();

/// Reads a long-format CSV (`day,side,category,on_hand,losses`). Rows may
/// appear in any order; exactly one row per (day, side, category) cell is
/// required. Errors carry the offending row number.
BattleSeries load_csv(const std::filesystem::path& path);

/// Writes the schema accepted by load_csv. Values round-trip bit-exactly.
void write_csv(const BattleSeries& series, const std::filesystem::path& path);

/// Restricts a series to the days inside `window` (day indices, inclusive).
BattleSeries slice(const BattleSeries& series, DayWindow window);

/// Keeps only the named categories, in the order given.
BattleSeries select_categories(const BattleSeries& series,
                               std::span<const std::string> labels);

} // namespace lanfit

#endif
