#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace sparnet {

/// Dense row-major matrix of doubles. Rows are samples, columns are features
/// or classes. This is the only tensor shape the project needs.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        Matrix m;
        for (const auto& r : rows) {
            if (m.rows_ == 0) m.cols_ = r.size();
            m.data_.insert(m.data_.end(), r.begin(), r.end());
            ++m.rows_;
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    void set_row(std::size_t r, std::span<const double> values) {
        for (std::size_t c = 0; c < cols_; ++c) data_[r * cols_ + c] = values[c];
    }

    /// New matrix holding the given rows of this one, in the given order.
    Matrix select_rows(std::span<const std::size_t> idx) const {
        Matrix out(idx.size(), cols_);
        for (std::size_t i = 0; i < idx.size(); ++i) out.set_row(i, row(idx[i]));
        return out;
    }

    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Feature matrix plus labels. Labels are consumed by metrics and pretraining
/// only; adaptation code paths receive the feature matrix alone.
struct Dataset {
    Matrix x;
    std::vector<int> labels;

    std::size_t size() const { return x.rows(); }
};

}  // namespace sparnet
