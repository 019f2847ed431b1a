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

#include "kec/config.h"
#include "kec/error.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace kec
{

namespace
{

[[noreturn]] void throw_config(const std::string& msg)
{
    throw Error(ErrorKind::Config, msg);
}

// Accepted keys per section.
const std::map<std::string, std::set<std::string>>& schema()
{
    static const std::map<std::string, std::set<std::string>> s{
        {"model", {"kind", "name"}},
        {"uncertainty", {"law", "a", "b", "p", "map", "order", "quad_order"}},
        {"contact", {"mu", "sigma2", "tau", "epsilon"}},
        {"epi", {"beta", "zeta", "gamma"}},
        {"control", {"selective", "x_target", "nu", "x_target_S", "x_target_E", "x_target_I", "x_target_R"}},
        {"grid", {"x_max", "dx"}},
        {"time", {"dt", "T", "stride"}},
        {"initial", {"rho_S", "rho_E", "rho_I", "rho_R", "m", "m_S", "m_E", "m_I", "m_R", "lambda"}},
        {"solver", {"scheme", "clip_negative", "tol_neg_rel", "epidemic", "snapshot"}},
        {"equilibrium", {"deltas", "m", "T", "dt", "mean", "tail_min", "tail_max", "initial_lambda"}},
        {"convergence", {"orders", "reference", "m"}},
        {"closure", {"taus", "tolerance"}},
        {"macro", {"dt", "T", "stride", "lambda", "clamp_mI"}},
        {"calibration",
         {"data", "format", "region", "population", "fractions", "measure", "recovered", "deaths", "t0",
          "t_lockdown", "t_final", "theta", "p", "beta_min", "beta_max", "lambda_min", "lambda_max", "restarts",
          "dt", "zeta", "gamma", "m_infected", "m0", "seed_persons", "nu", "selective", "k_left", "k_right",
          "x_max", "warm_start"}},
    };
    return s;
}

std::string trim(std::string s)
{
    const auto not_space = [](unsigned char c) {
        return !std::isspace(c);
    };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

// Strips a trailing # comment and surrounding quotes.
std::string clean_value(const std::string& raw)
{
    std::string v = trim(raw);
    if (!v.empty() && (v.front() == '"' || v.front() == '\'')) {
        const auto close = v.find(v.front(), 1);
        if (close == std::string::npos) {
            throw_config("unterminated string: " + v);
        }
        return v.substr(1, close - 1);
    }
    if (const auto hash = v.find('#'); hash != std::string::npos) {
        v = trim(v.substr(0, hash));
    }
    // TOML arrays
    if (!v.empty() && v.front() == '[' && v.back() == ']') {
        v = trim(v.substr(1, v.size() - 2));
    }
    return v;
}

std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.size() >= 2 && (item.front() == '"' || item.front() == '\'') && item.back() == item.front()) {
            item = item.substr(1, item.size() - 2);
        }
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

double to_double(const std::string& text, bool& ok)
{
    std::size_t used = 0;
    ok               = false;
    try {
        const double v = std::stod(text, &used);
        ok             = used == text.size() && std::isfinite(v);
        return v;
    }
    catch (const std::exception&) {
        return 0.0;
    }
}

} // namespace

std::string sha256_hex(const std::string& bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 failed");
    }
    std::string hex;
    for (unsigned int k = 0; k < len; ++k) {
        hex += fmt::format("{:02x}", digest[k]);
    }
    return hex;
}

Config Config::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw_config("cannot open config file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

Config Config::parse(const std::string& text, const std::string& origin)
{
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::read_ini(in, tree);
    }
    catch (const boost::property_tree::ini_parser_error& e) {
        throw_config(fmt::format("{}:{}: {}", origin, e.line(), e.message()));
    }
    Config cfg;
    cfg.m_origin = origin;
    cfg.m_sha256 = sha256_hex(text);
    const auto& known = schema();
    for (const auto& [section, body] : tree) {
        const auto it = known.find(section);
        if (it == known.end()) {
            if (body.empty()) {
                throw_config(fmt::format("{}: key '{}' outside of any section", origin, section));
            }
            throw_config(fmt::format("{}: unknown section [{}]", origin, section));
        }
        for (const auto& [key, value] : body) {
            if (!it->second.contains(key)) {
                throw_config(fmt::format("{}: unknown key '{}' in [{}]", origin, key, section));
            }
            cfg.m_values[section + "." + key] = clean_value(value.data());
        }
    }
    return cfg;
}

void Config::fail(const std::string& key, const std::string& what) const
{
    throw_config(fmt::format("{}: {}: {}", m_origin, key, what));
}

bool Config::has(const std::string& key) const
{
    return m_values.contains(key);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const
{
    const auto it = m_values.find(key);
    return it == m_values.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const
{
    const auto it = m_values.find(key);
    if (it == m_values.end()) {
        return fallback;
    }
    bool ok        = false;
    const double v = to_double(it->second, ok);
    if (!ok) {
        fail(key, "expected a number, got '" + it->second + "'");
    }
    return v;
}

int Config::get_int(const std::string& key, int fallback) const
{
    const auto it = m_values.find(key);
    if (it == m_values.end()) {
        return fallback;
    }
    std::size_t used = 0;
    int v            = 0;
    try {
        v = std::stoi(it->second, &used);
    }
    catch (const std::exception&) {
        used = 0;
    }
    if (used != it->second.size() || it->second.empty()) {
        fail(key, "expected an integer, got '" + it->second + "'");
    }
    return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const
{
    const auto it = m_values.find(key);
    if (it == m_values.end()) {
        return fallback;
    }
    if (it->second == "true") {
        return true;
    }
    if (it->second == "false") {
        return false;
    }
    fail(key, "expected true or false, got '" + it->second + "'");
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& fallback) const
{
    const auto it = m_values.find(key);
    if (it == m_values.end()) {
        return fallback;
    }
    std::vector<double> out;
    for (const auto& item : split_list(it->second)) {
        bool ok        = false;
        const double v = to_double(item, ok);
        if (!ok) {
            fail(key, "expected a list of numbers, got '" + it->second + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        fail(key, "empty list");
    }
    return out;
}

std::vector<std::string> Config::get_string_list(const std::string& key,
                                                 const std::vector<std::string>& fallback) const
{
    const auto it = m_values.find(key);
    if (it == m_values.end()) {
        return fallback;
    }
    auto out = split_list(it->second);
    if (out.empty()) {
        fail(key, "empty list");
    }
    return out;
}

Selective parse_selective(const std::string& name)
{
    if (name == "off") {
        return Selective::Off;
    }
    if (name == "uniform") {
        return Selective::Uniform;
    }
    if (name == "sqrtx") {
        return Selective::SqrtX;
    }
    throw_config("selective must be off, uniform or sqrtx, got '" + name + "'");
}

UncertaintyLaw Config::uncertainty() const
{
    const auto law = get_string("uncertainty.law", "uniform");
    const auto map = get_string("uncertainty.map", law == "bernoulli" ? "affine_flip" : "identity");
    DeltaMap dm    = DeltaMap::Identity;
    if (map == "affine_flip") {
        dm = DeltaMap::AffineFlip;
    }
    else if (map != "identity") {
        fail("uncertainty.map", "expected identity or affine_flip, got '" + map + "'");
    }
    UncertaintyLaw out;
    if (law == "uniform") {
        out = UncertaintyLaw::uniform(get_double("uncertainty.a", -1.0), get_double("uncertainty.b", 1.0), dm,
                                      get_int("uncertainty.quad_order", 0));
    }
    else if (law == "bernoulli") {
        out = UncertaintyLaw::bernoulli(get_double("uncertainty.p", 0.5), dm);
    }
    else {
        fail("uncertainty.law", "expected uniform or bernoulli, got '" + law + "'");
    }
    try {
        out.validate();
    }
    catch (const Error& e) {
        fail("uncertainty", e.what());
    }
    return out;
}

int Config::order() const
{
    const int m = get_int("uncertainty.order", 5);
    if (m < 0) {
        fail("uncertainty.order", "must be nonnegative");
    }
    return m;
}

ContactParams Config::contact() const
{
    ContactParams p;
    p.mu      = get_double("contact.mu", p.mu);
    p.sigma2  = get_double("contact.sigma2", p.sigma2);
    p.tau     = get_double("contact.tau", p.tau);
    p.epsilon = get_double("contact.epsilon", p.epsilon);
    try {
        p.validate();
    }
    catch (const Error& e) {
        fail("contact", e.what());
    }
    return p;
}

EpiParams Config::epi() const
{
    EpiParams e{get_double("epi.beta", 0.0), get_double("epi.zeta", 0.0), get_double("epi.gamma", 0.0)};
    try {
        e.validate();
    }
    catch (const Error& err) {
        fail("epi", err.what());
    }
    return e;
}

ControlSpec Config::control() const
{
    ControlSpec c;
    c.selective     = parse_selective(get_string("control.selective", "off"));
    c.nu            = get_double("control.nu", c.nu);
    const double xt = get_double("control.x_target", 5.0);
    const char* names[] = {"x_target_S", "x_target_E", "x_target_I", "x_target_R"};
    for (auto comp : all_compartments) {
        c.x_target[comp] = get_double(std::string("control.") + names[index(comp)], xt);
    }
    try {
        c.validate();
    }
    catch (const Error& e) {
        fail("control", e.what());
    }
    return c;
}

Grid1D Config::grid(double default_x_max, double default_dx) const
{
    try {
        return Grid1D::with_spacing(get_double("grid.x_max", default_x_max), get_double("grid.dx", default_dx));
    }
    catch (const Error& e) {
        fail("grid", e.what());
    }
}

FluxScheme Config::scheme(FluxScheme fallback) const
{
    const auto s = get_string("solver.scheme", "");
    if (s.empty()) {
        return fallback;
    }
    if (s == "central") {
        return FluxScheme::Central;
    }
    if (s == "chang_cooper") {
        return FluxScheme::ChangCooper;
    }
    fail("solver.scheme", "expected central or chang_cooper, got '" + s + "'");
}

} // namespace kec
