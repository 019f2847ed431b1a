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

#ifndef KEC_ERROR_H
#define KEC_ERROR_H

#include <stdexcept>
#include <string>

namespace kec
{

enum class ErrorKind
{
    InvalidArgument,
    Config,
    Numerical,
    Data,
    Optimization,
};

/// Exception type used throughout the library. The kind drives CLI exit codes.
class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what)
        , m_kind(kind)
    {
    }

    ErrorKind kind() const noexcept
    {
        return m_kind;
    }

private:
    ErrorKind m_kind;
};

[[noreturn]] inline void throw_invalid(const std::string& msg)
{
    throw Error(ErrorKind::InvalidArgument, msg);
}

[[noreturn]] inline void throw_numerical(const std::string& msg)
{
    throw Error(ErrorKind::Numerical, msg);
}

} // namespace kec

#endif // KEC_ERROR_H
