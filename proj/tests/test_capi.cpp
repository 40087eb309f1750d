#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include "gicn.h"

TEST_CASE("placeholder") { CHECK(true); }
