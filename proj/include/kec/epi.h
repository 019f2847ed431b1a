/*
 * Copyright (C) 2026 The kec authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef KEC_EPI_H
#define KEC_EPI_H

namespace kec
{

/// Epidemic rates: bilinear contact rate beta, 1/latency zeta, 1/infectious period gamma.
struct EpiParams {
    double beta  = 0.0;
    double zeta  = 0.0;
    double gamma = 0.0;

    void validate() const;
};

} // namespace kec

#endif // KEC_EPI_H
