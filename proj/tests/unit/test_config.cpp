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

#include <gtest/gtest.h>

#include <cmath>
#include <string>

using namespace kec;

namespace
{

ErrorKind kind_of(const std::string& text)
{
    try {
        Config::parse(text, "case.toml");
    }
    catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::InvalidArgument;
}

} // namespace

TEST(Sha256, KnownVectors)
{
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Config, HashIsOfTheText)
{
    const std::string text = "[epi]\nbeta = 0.1\n";
    EXPECT_EQ(Config::parse(text).sha256(), sha256_hex(text));
    EXPECT_NE(Config::parse(text).sha256(), Config::parse(text + "\n").sha256());
}

TEST(Config, ScalarsCommentsAndQuotes)
{
    const auto cfg = Config::parse("# scenario\n[epi]\nbeta = 0.0025 # per contact\nzeta = 0.3\ngamma = 0.1\n"
                                   "[control]\nselective = \"sqrtx\"\nx_target = 6\n[solver]\nclip_negative = false\n");
    EXPECT_DOUBLE_EQ(cfg.get_double("epi.beta", 0.0), 0.0025);
    EXPECT_EQ(cfg.get_string("control.selective", ""), "sqrtx");
    EXPECT_FALSE(cfg.get_bool("solver.clip_negative", true));
    EXPECT_DOUBLE_EQ(cfg.get_double("grid.dx", 0.7), 0.7);
    EXPECT_FALSE(cfg.has("grid.dx"));
    const auto epi = cfg.epi();
    EXPECT_DOUBLE_EQ(epi.zeta, 0.3);
    const auto control = cfg.control();
    EXPECT_EQ(control.selective, Selective::SqrtX);
    EXPECT_DOUBLE_EQ(control.x_target[Compartment::I], 6.0);
}

TEST(Config, Lists)
{
    const auto cfg = Config::parse("[equilibrium]\ndeltas = [-1, -0.5, 0.5, 1]\n"
                                   "[calibration]\nselective = [\"uniform\", \"sqrtx\"]\np = 0.5\n");
    EXPECT_EQ(cfg.get_list("equilibrium.deltas", {}), (std::vector<double>{-1, -0.5, 0.5, 1}));
    EXPECT_EQ(cfg.get_string_list("calibration.selective", {}), (std::vector<std::string>{"uniform", "sqrtx"}));
    EXPECT_EQ(cfg.get_list("calibration.p", {}), std::vector<double>{0.5});
}

TEST(Config, SchemaErrors)
{
    EXPECT_EQ(kind_of("[epi]\nbeta_typo = 1\n"), ErrorKind::Config);
    EXPECT_EQ(kind_of("[nonsense]\nbeta = 1\n"), ErrorKind::Config);
    EXPECT_EQ(kind_of("[epi\nbeta = 1\n"), ErrorKind::Config);
    const auto cfg = Config::parse("[epi]\nbeta = fast\n[uncertainty]\nlaw = cauchy\n");
    EXPECT_THROW(cfg.get_double("epi.beta", 0.0), Error);
    EXPECT_THROW(cfg.uncertainty(), Error);
    EXPECT_THROW(Config::load("/nonexistent/kec.toml"), Error);
}

TEST(Config, Builders)
{
    const auto cfg = Config::parse("[uncertainty]\nlaw = \"bernoulli\"\np = 0.25\norder = 1\n"
                                   "[contact]\nmu = 0.5\nsigma2 = 0.1\n[grid]\nx_max = 50\ndx = 0.5\n");
    const auto law = cfg.uncertainty();
    EXPECT_TRUE(law.is_bernoulli());
    EXPECT_EQ(cfg.order(), 1);
    EXPECT_NEAR(cfg.contact().lambda(), 5.0, 1e-12);
    const auto grid = cfg.grid();
    EXPECT_EQ(grid.size(), 101u);
    EXPECT_DOUBLE_EQ(grid.dx(), 0.5);
    EXPECT_THROW(Config::parse("[grid]\ndx = -1\n").grid(), Error);
    EXPECT_THROW(parse_selective("everyone"), Error);
}
