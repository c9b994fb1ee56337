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
#include "amv/grid.hpp"

#include <cmath>

#include "amv/error.hpp"

namespace amv {

TimeGrid::TimeGrid(double horizon, std::size_t steps, double delta)
    : horizon_(horizon), steps_(steps), dt_(0.0), delta_(delta), delta_steps_(0) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw ConfigError("horizon T must be positive and finite");
    }
    if (steps == 0) {
        throw ConfigError("grid needs at least one step");
    }
    if (!(delta >= 0.0) || !std::isfinite(delta)) {
        throw ConfigError("delta must be nonnegative and finite");
    }
    dt_ = horizon / static_cast<double>(steps);
    const double ratio = delta / dt_;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
        throw ConfigError("delta must be an integer multiple of dt");
    }
    delta_steps_ = static_cast<std::size_t>(rounded);
}

std::vector<double> PathMatrix::column(std::size_t k) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, k);
    return out;
}

PathMatrix operator-(const PathMatrix& a, const PathMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) {
        throw ConfigError("path arrays have different shapes");
    }
    PathMatrix out(a.rows_, a.cols_);
    for (std::size_t n = 0; n < a.data_.size(); ++n) out.data_[n] = a.data_[n] - b.data_[n];
    return out;
}

PathMatrix operator*(double s, const PathMatrix& a) {
    PathMatrix out(a.rows_, a.cols_);
    for (std::size_t n = 0; n < a.data_.size(); ++n) out.data_[n] = s * a.data_[n];
    return out;
}

double max_abs_difference(const PathMatrix& a, const PathMatrix& b) {
    const PathMatrix d = a - b;
    double m = 0.0;
    for (double v : d.data()) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace amv
