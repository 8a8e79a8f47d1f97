#pragma once

// c10's logging header defines CHECK and friends; load it first and drop those macros so
// doctest's assertions win no matter which library header a test pulls in later.
#include <torch/torch.h>

#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LT
#undef CHECK_LE
#undef CHECK_GT
#undef CHECK_GE
#undef CHECK_NOTNULL

#include <doctest.h>
