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

#ifndef KEC_CONFIG_H
#define KEC_CONFIG_H

#include "kec/contact.h"
#include "kec/control.h"
#include "kec/epi.h"
#include "kec/fpsolve.h"
#include "kec/grid.h"
#include "kec/uq.h"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kec
{

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(const std::string& bytes);

/**
 * Scenario configuration: an INI/TOML-style file of [section] blocks with key = value lines.
 * Unknown sections or keys are rejected. Typed accessors report malformed values as config errors.
 */
class Config
{
public:
    static Config load(const std::filesystem::path& path);
    static Config parse(const std::string& text, const std::string& origin = "<config>");

    const std::string& sha256() const
    {
        return m_sha256;
    }
    const std::string& origin() const
    {
        return m_origin;
    }

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& key, const std::vector<std::string>& fallback) const;

    // section builders with the library defaults
    UncertaintyLaw uncertainty() const;
    int order() const;
    ContactParams contact() const;
    EpiParams epi() const;
    ControlSpec control() const;
    Grid1D grid(double default_x_max = 500.0, double default_dx = 0.1) const;
    FluxScheme scheme(FluxScheme fallback) const;

private:
    std::map<std::string, std::string> m_values; ///< "section.key" -> raw value
    std::string m_sha256;
    std::string m_origin;

    [[noreturn]] void fail(const std::string& key, const std::string& what) const;
};

Selective parse_selective(const std::string& name);

} // namespace kec

#endif // KEC_CONFIG_H
