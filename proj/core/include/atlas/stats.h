// Copyright 2026 The Atlas Audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ATLAS_STATS_H_
#define ATLAS_STATS_H_

#include <cstddef>
#include <span>
#include <vector>

namespace atlas {

// Empirical quantile with linear interpolation between order statistics
// (Hyndman-Fan type 7). q in [0, 1]; values need not be sorted.
double Quantile(std::span<const double> values, double q);

// Same, over values already sorted ascending.
double QuantileSorted(std::span<const double> sorted, double q);

double Median(std::span<const double> values);

double Mean(std::span<const double> values);

// ceil(x) that forgives representation error, so ceil(0.025 * 1000) == 25
// even though 0.975 * 1000 is not exactly 975.
std::size_t CeilCount(double x);

}  // namespace atlas

#endif  // ATLAS_STATS_H_
