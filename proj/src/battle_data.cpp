#include "lanfit/battle_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "number_format.hpp"

namespace lanfit {

namespace {

void check_column(const BattleSeries::Column& col, std::size_t n_days,
                  const char* side, const std::string& category) {
    if (col.on_hand.size() != n_days || col.losses.size() != n_days) {
        throw ValidationError("series column length mismatch for side " +
                              std::string(side) + ", category '" + category + "'");
    }
    for (std::size_t t = 0; t < n_days; ++t) {
        for (double v : {col.on_hand[t], col.losses[t]}) {
            if (!std::isfinite(v) || v < 0.0) {
                throw ValidationError("non-finite or negative value at day position " +
                                      std::to_string(t) + " for side " + side +
                                      ", category '" + category + "'");
            }
        }
    }
}

} // namespace

BattleSeries BattleSeries::create(std::vector<int> days,
                                  std::vector<std::string> categories,
                                  std::vector<Column> x_columns,
                                  std::vector<Column> y_columns) {
    if (days.empty()) throw ValidationError("no data rows");
    if (categories.empty()) throw ValidationError("no categories");
    for (std::size_t i = 1; i < days.size(); ++i) {
        if (days[i] <= days[i - 1]) {
            throw ValidationError("day indices must be strictly increasing");
        }
    }
    std::set<std::string> seen(categories.begin(), categories.end());
    if (seen.size() != categories.size()) {
        throw ValidationError("duplicate category label");
    }
    if (x_columns.size() != categories.size() || y_columns.size() != categories.size()) {
        throw ValidationError("column count does not match category count");
    }
    for (std::size_t c = 0; c < categories.size(); ++c) {
        check_column(x_columns[c], days.size(), "X", categories[c]);
        check_column(y_columns[c], days.size(), "Y", categories[c]);
    }

    BattleSeries s;
    s.days_ = std::move(days);
    s.categories_ = std::move(categories);
    s.sides_[0] = std::move(x_columns);
    s.sides_[1] = std::move(y_columns);
    return s;
}

std::optional<std::size_t> BattleSeries::category_index(std::string_view label) const {
    for (std::size_t i = 0; i < categories_.size(); ++i) {
        if (categories_[i] == label) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> BattleSeries::day_position(int day) const {
    auto it = std::lower_bound(days_.begin(), days_.end(), day);
    if (it == days_.end() || *it != day) return std::nullopt;
    return static_cast<std::size_t>(it - days_.begin());
}

double BattleSeries::total_losses(Side side, std::size_t category) const {
    const auto& col = column(side, category);
    double sum = 0.0;
    for (double v : col.losses) sum += v;
    return sum;
}

namespace {

// Daily tank and artillery strengths/losses, 14 days.
// Columns: soviet tank on-hand/losses, german tank on-hand/losses,
//          soviet arty on-hand/losses, german arty on-hand/losses.
constexpr double kKursk[14][8] = {
    {2396, 105, 986, 198, 705, 13, 1166, 24},
    {2367, 117, 749, 248, 676, 30, 1161, 5},
    {2064, 259, 673, 121, 661, 15, 1154, 7},
    {1754, 315, 596, 108, 648, 14, 1213, 13},
    {1495, 289, 490, 139, 640, 9, 1210, 6},
    {1406, 157, 548, 36, 629, 13, 1199, 12},
    {1351, 135, 563, 63, 628, 7, 1206, 15},
    {977, 414, 500, 98, 613, 16, 1194, 12},
    {978, 117, 495, 57, 606, 10, 1187, 7},
    {907, 118, 480, 46, 603, 5, 1184, 5},
    {883, 96, 426, 79, 601, 5, 1183, 3},
    {985, 27, 495, 23, 600, 3, 1179, 4},
    {978, 42, 557, 7, 602, 0, 1182, 2},
    {948, 85, 588, 6, 591, 4, 1182, 11},
};

} // namespace

BattleSeries kursk_dataset() {
    std::vector<int> days(14);
    for (int d = 0; d < 14; ++d) days[d] = d + 1;

    BattleSeries::Column x_tank, y_tank, x_arty, y_arty;
    for (const auto& row : kKursk) {
        x_tank.on_hand.push_back(row[0]);
        x_tank.losses.push_back(row[1]);
        y_tank.on_hand.push_back(row[2]);
        y_tank.losses.push_back(row[3]);
        x_arty.on_hand.push_back(row[4]);
        x_arty.losses.push_back(row[5]);
        y_arty.on_hand.push_back(row[6]);
        y_arty.losses.push_back(row[7]);
    }
    return BattleSeries::create(std::move(days), {"tank", "artillery"},
                                {std::move(x_tank), std::move(x_arty)},
                                {std::move(y_tank), std::move(y_arty)});
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& field, int row, const char* what) {
    const std::string t = trim(field);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw ValidationError("row " + std::to_string(row) + ": non-numeric " +
                              std::string(what) + " '" + field + "'");
    }
    return value;
}

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace

BattleSeries load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");

    std::string line;
    int row = 0;
    if (!std::getline(in, line)) throw ValidationError("no data rows");
    ++row;
    {
        auto header = split_csv_line(line);
        const std::vector<std::string> expected = {"day", "side", "category",
                                                   "on_hand", "losses"};
        bool ok = header.size() == expected.size();
        for (std::size_t i = 0; ok && i < expected.size(); ++i) {
            ok = trim(header[i]) == expected[i];
        }
        if (!ok) {
            throw ValidationError("row 1: expected header "
                                  "'day,side,category,on_hand,losses'");
        }
    }

    struct Cell { double on_hand, losses; };
    std::map<std::tuple<int, char, std::string>, Cell> cells;
    std::set<int> day_set;
    std::vector<std::string> categories; // in order of first appearance

    bool any = false;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        any = true;
        auto f = split_csv_line(line);
        if (f.size() != 5) {
            throw ValidationError("row " + std::to_string(row) +
                                  ": expected 5 fields, got " + std::to_string(f.size()));
        }
        const double day_v = parse_number(f[0], row, "day");
        if (day_v <= 0 || day_v != std::floor(day_v)) {
            throw ValidationError("row " + std::to_string(row) +
                                  ": day must be a positive integer");
        }
        const int day = static_cast<int>(day_v);
        const std::string side_s = trim(f[1]);
        if (side_s != "X" && side_s != "Y") {
            throw ValidationError("row " + std::to_string(row) +
                                  ": side must be X or Y, got '" + side_s + "'");
        }
        const std::string category = trim(f[2]);
        if (category.empty()) {
            throw ValidationError("row " + std::to_string(row) + ": empty category");
        }
        const double on_hand = parse_number(f[3], row, "on_hand");
        const double losses = parse_number(f[4], row, "losses");
        if (on_hand < 0 || losses < 0) {
            throw ValidationError("row " + std::to_string(row) + ": negative value");
        }

        auto key = std::make_tuple(day, side_s[0], category);
        if (!cells.emplace(key, Cell{on_hand, losses}).second) {
            throw ValidationError("row " + std::to_string(row) + ": duplicate cell (day " +
                                  std::to_string(day) + ", side " + side_s +
                                  ", category '" + category + "')");
        }
        day_set.insert(day);
        if (std::find(categories.begin(), categories.end(), category) == categories.end()) {
            categories.push_back(category);
        }
    }
    if (!any) throw ValidationError("no data rows");

    std::vector<int> days(day_set.begin(), day_set.end());
    std::vector<BattleSeries::Column> x_cols(categories.size()), y_cols(categories.size());
    for (std::size_t c = 0; c < categories.size(); ++c) {
        for (int day : days) {
            for (char side : {'X', 'Y'}) {
                auto it = cells.find(std::make_tuple(day, side, categories[c]));
                if (it == cells.end()) {
                    throw ValidationError("missing cell (day " + std::to_string(day) +
                                          ", side " + std::string(1, side) +
                                          ", category '" + categories[c] + "')");
                }
                auto& col = side == 'X' ? x_cols[c] : y_cols[c];
                col.on_hand.push_back(it->second.on_hand);
                col.losses.push_back(it->second.losses);
            }
        }
    }
    return BattleSeries::create(std::move(days), std::move(categories),
                                std::move(x_cols), std::move(y_cols));
}

void write_csv(const BattleSeries& series, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << "day,side,category,on_hand,losses\n";
    for (std::size_t t = 0; t < series.n_days(); ++t) {
        for (Side side : {Side::X, Side::Y}) {
            for (std::size_t c = 0; c < series.n_categories(); ++c) {
                out << series.day(t) << ',' << side_label(side) << ','
                    << series.categories()[c] << ','
                    << format_double(series.on_hand(side, c, t)) << ','
                    << format_double(series.losses(side, c, t)) << '\n';
            }
        }
    }
}

BattleSeries slice(const BattleSeries& series, DayWindow window) {
    if (window.first > window.last) {
        throw ValidationError("window first day " + std::to_string(window.first) +
                              " exceeds last day " + std::to_string(window.last));
    }
    if (!series.day_position(window.first) || !series.day_position(window.last)) {
        throw ValidationError("window [" + std::to_string(window.first) + "," +
                              std::to_string(window.last) + "] is outside the series days [" +
                              std::to_string(series.days().front()) + "," +
                              std::to_string(series.days().back()) + "]");
    }

    std::vector<int> days;
    std::vector<std::size_t> keep;
    for (std::size_t t = 0; t < series.n_days(); ++t) {
        if (window.contains(series.day(t))) {
            days.push_back(series.day(t));
            keep.push_back(t);
        }
    }
    auto take = [&](Side side, std::size_t c) {
        BattleSeries::Column col;
        for (std::size_t t : keep) {
            col.on_hand.push_back(series.on_hand(side, c, t));
            col.losses.push_back(series.losses(side, c, t));
        }
        return col;
    };
    std::vector<BattleSeries::Column> x_cols, y_cols;
    for (std::size_t c = 0; c < series.n_categories(); ++c) {
        x_cols.push_back(take(Side::X, c));
        y_cols.push_back(take(Side::Y, c));
    }
    return BattleSeries::create(std::move(days), series.categories(),
                                std::move(x_cols), std::move(y_cols));
}

BattleSeries select_categories(const BattleSeries& series,
                               std::span<const std::string> labels) {
    std::vector<std::string> categories;
    std::vector<BattleSeries::Column> x_cols, y_cols;
    for (const auto& label : labels) {
        auto idx = series.category_index(label);
        if (!idx) {
            throw ValidationError("category '" + label + "' not present in series");
        }
        categories.push_back(label);
        x_cols.push_back(series.column(Side::X, *idx));
        y_cols.push_back(series.column(Side::Y, *idx));
    }
    return BattleSeries::create(series.days(), std::move(categories),
                                std::move(x_cols), std::move(y_cols));
}

} // namespace lanfit
