/*
 Copyright 2026 The amv Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace amv {

/// Uniform grid t_k = k dt on [0, T] whose step divides the lag delta.
class TimeGrid {
public:
    /// Throws ConfigError("delta must be an integer multiple of dt") when
    /// delta / dt is not an integer (relative tolerance 1e-9).
    TimeGrid(double horizon, std::size_t steps, double delta);

    double horizon() const noexcept { return horizon_; }
    std::size_t steps() const noexcept { return steps_; }
    double dt() const noexcept { return dt_; }
    double delta() const noexcept { return delta_; }
    std::size_t delta_steps() const noexcept { return delta_steps_; }

    double time(std::size_t k) const noexcept {
        return k == steps_ ? horizon_ : static_cast<double>(k) * dt_;
    }
    /// Node index of t_k + delta under the X(t) = X(T), t >= T convention.
    std::size_t ahead(std::size_t k) const noexcept {
        return std::min(k + delta_steps_, steps_);
    }

    bool operator==(const TimeGrid&) const = default;

private:
    double horizon_;
    std::size_t steps_;
    double dt_;
    double delta_;
    std::size_t delta_steps_;
};

/// Row-major particles x nodes array. Row i is particle i's path.
class PathMatrix {
public:
    PathMatrix() = default;
    PathMatrix(std::size_t particles, std::size_t nodes, double fill = 0.0)
        : rows_(particles), cols_(nodes), data_(particles * nodes, fill) {}

    std::size_t particles() const noexcept { return rows_; }
    std::size_t nodes() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t k) noexcept { return data_[i * cols_ + k]; }
    double operator()(std::size_t i, std::size_t k) const noexcept { return data_[i * cols_ + k]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }
    /// Copies node k of every particle into a fresh vector.
    std::vector<double> column(std::size_t k) const;

    std::span<const double> data() const noexcept { return data_; }

    friend PathMatrix operator-(const PathMatrix& a, const PathMatrix& b);
    friend PathMatrix operator*(double s, const PathMatrix& a);
    bool operator==(const PathMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Largest absolute entry of a - b.
double max_abs_difference(const PathMatrix& a, const PathMatrix& b);

}  // namespace amv
