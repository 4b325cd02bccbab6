#ifndef GEB_TABLE_HPP
#define GEB_TABLE_HPP

#include <algorithm>
#include <cmath>
#include <vector>

namespace geb {

// Dense row-major n x m table of doubles. Rows index prompts, columns
// index responses. Small enough everywhere that no linear-algebra
// library is warranted.
struct Table {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Table() = default;
    Table(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }

    bool same_shape(const Table& other) const {
        return rows == other.rows && cols == other.cols;
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data) m = std::max(m, std::abs(v));
        return m;
    }
};

// Average over rows of half the L1 distance between corresponding rows.
inline double total_variation(const Table& a, const Table& b) {
    double tv = 0.0;
    for (int x = 0; x < a.rows; ++x) {
        double s = 0.0;
        for (int y = 0; y < a.cols; ++y) s += std::abs(a.at(x, y) - b.at(x, y));
        tv += 0.5 * s;
    }
    return tv / a.rows;
}

} // namespace geb

#endif
