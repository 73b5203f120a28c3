// SPDX-License-Identifier: MIT
#include "twoscale/common.hpp"

#include <catch_amalgamated.hpp>

using namespace twoscale;

TEST_CASE("joint_ci adds in quadrature") { CHECK(joint_ci(3.0, 4.0) == Catch::Approx(5.0)); }
