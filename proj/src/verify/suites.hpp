#pragma once

#include <cstdio>

#include "dcf/verify.hpp"

namespace dcf::verify {

void oracle_suite(Reporter& r);
void fft_suite(Reporter& r);
void gradient_suite(Reporter& r);
void filtering_suite(Reporter& r);
void mask_suite(Reporter& r);
void shape_suite(Reporter& r);
void model_suite(Reporter& r);
void loss_suite(Reporter& r);
void metric_suite(Reporter& r);

// Largest absolute elementwise difference; infinity on shape mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace dcf::verify
