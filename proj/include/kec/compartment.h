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

#ifndef KEC_COMPARTMENT_H
#define KEC_COMPARTMENT_H

#include <array>
#include <cstddef>
#include <string_view>

namespace kec
{

enum class Compartment : std::size_t
{
    S = 0,
    E = 1,
    I = 2,
    R = 3,
};

inline constexpr std::size_t num_compartments = 4;

inline constexpr std::array<Compartment, num_compartments> all_compartments = {Compartment::S, Compartment::E,
                                                                               Compartment::I, Compartment::R};

constexpr std::size_t index(Compartment c)
{
    return static_cast<std::size_t>(c);
}

constexpr std::string_view name(Compartment c)
{
    constexpr std::array<std::string_view, num_compartments> names = {"S", "E", "I", "R"};
    return names[index(c)];
}

/// Per-compartment value holder indexed by Compartment.
template <class T>
struct PerCompartment {
    std::array<T, num_compartments> values{};

    T& operator[](Compartment c)
    {
        return values[index(c)];
    }
    const T& operator[](Compartment c) const
    {
        return values[index(c)];
    }
};

} // namespace kec

#endif // KEC_COMPARTMENT_H
