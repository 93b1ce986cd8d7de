#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "s2r/errors.hpp"
#include "s2r/tensor.hpp"

using s2r::DimensionError;
using s2r::ImageTensor;
using s2r::NumericError;
using s2r::ValidityMask;
using s2r::ValueDomain;

TEST_CASE("fill constructor sets dims and values") {
  ImageTensor t(3, 4, 5, ValueDomain::kSigned, 0.25f);
  CHECK(t.channels() == 3);
  CHECK(t.rows() == 4);
  CHECK(t.cols() == 5);
  CHECK(t.size() == 60);
  CHECK(!t.empty());
  CHECK(t.domain() == ValueDomain::kSigned);
  for (float v : t.vec()) CHECK(v == 0.25f);
}

TEST_CASE("default tensor is empty") {
  ImageTensor t;
  CHECK(t.empty());
  CHECK(t.size() == 0);
  CHECK(t.channels() == 0);
  t.validate();  // vacuously fine
}

TEST_CASE("negative dimension rejected") {
  CHECK_THROWS_AS(ImageTensor(1, -2, 3, ValueDomain::kFree), DimensionError);
}

TEST_CASE("data constructor checks length") {
  std::vector<float> d(24, 0.0f);
  ImageTensor ok(d, 2, 3, 4, ValueDomain::kFree);
  CHECK(ok.size() == 24);
  CHECK_THROWS_AS(ImageTensor(d, 2, 3, 5, ValueDomain::kFree), DimensionError);
}

TEST_CASE("at uses channel-major layout") {
  ImageTensor t(2, 3, 4, ValueDomain::kFree);
  // index = (c * rows + r) * cols + col
  t.at(1, 2, 3) = 7.0f;
  CHECK(t.vec()[(1 * 3 + 2) * 4 + 3] == 7.0f);
  t.vec()[(0 * 3 + 1) * 4 + 2] = -3.0f;
  CHECK(t.at(0, 1, 2) == -3.0f);
  // Writing one element touches no other.
  int nonzero = 0;
  for (float v : t.vec()) nonzero += v != 0.0f;
  CHECK(nonzero == 2);
}

TEST_CASE("same_dims and same_spatial") {
  ImageTensor a(3, 4, 5, ValueDomain::kSigned);
  ImageTensor b(3, 4, 5, ValueDomain::kFree);
  ImageTensor c(1, 4, 5, ValueDomain::kSigned);
  ImageTensor d(3, 5, 4, ValueDomain::kSigned);
  CHECK(a.same_dims(b));  // domain is not part of the shape
  CHECK(!a.same_dims(c));
  CHECK(a.same_spatial(c));  // channels differ, spatial agrees
  CHECK(!a.same_dims(d));
  CHECK(!a.same_spatial(d));
}

TEST_CASE("validate accepts in-range values per domain") {
  ImageTensor s(1, 2, 2, ValueDomain::kSigned);
  s.vec() = {-1.0f, 1.0f, 0.0f, 0.5f};
  s.validate();

  ImageTensor u(1, 2, 2, ValueDomain::kUnit);
  u.vec() = {0.0f, 1.0f, 0.25f, 0.999f};
  u.validate();

  ImageTensor f(1, 2, 2, ValueDomain::kFree);
  f.vec() = {-1e6f, 1e6f, 0.0f, 42.0f};
  f.validate();
}

TEST_CASE("validate rejects out-of-range signed values") {
  ImageTensor t(1, 1, 2, ValueDomain::kSigned);
  t.vec() = {0.0f, 1.0001f};
  CHECK_THROWS_AS(t.validate(), NumericError);
  t.vec() = {-1.0001f, 0.0f};
  CHECK_THROWS_AS(t.validate(), NumericError);
}

TEST_CASE("validate rejects out-of-range unit values") {
  ImageTensor t(1, 1, 2, ValueDomain::kUnit);
  t.vec() = {0.5f, -0.0001f};
  CHECK_THROWS_AS(t.validate(), NumericError);
  t.vec() = {1.0001f, 0.5f};
  CHECK_THROWS_AS(t.validate(), NumericError);
}

TEST_CASE("NaN is allowed only in the free domain") {
  const float nan = std::numeric_limits<float>::quiet_NaN();

  ImageTensor f(1, 1, 2, ValueDomain::kFree);
  f.vec() = {nan, 3.0f};
  f.validate();  // NaN encodes "undefined" for disparities

  ImageTensor s(1, 1, 2, ValueDomain::kSigned);
  s.vec() = {nan, 0.0f};
  CHECK_THROWS_AS(s.validate(), NumericError);

  ImageTensor u(1, 1, 2, ValueDomain::kUnit);
  u.vec() = {nan, 0.0f};
  CHECK_THROWS_AS(u.validate(), NumericError);
}

TEST_CASE("infinity is rejected in every domain") {
  const float inf = std::numeric_limits<float>::infinity();
  for (ValueDomain d :
       {ValueDomain::kSigned, ValueDomain::kUnit, ValueDomain::kFree}) {
    ImageTensor t(1, 1, 1, d);
    t.vec() = {inf};
    CHECK_THROWS_AS(t.validate(), NumericError);
    t.vec() = {-inf};
    CHECK_THROWS_AS(t.validate(), NumericError);
  }
}

TEST_CASE("set_domain re-labels without touching data") {
  ImageTensor t(1, 1, 1, ValueDomain::kFree);
  t.vec() = {5.0f};
  t.validate();
  t.set_domain(ValueDomain::kSigned);
  CHECK(t.domain() == ValueDomain::kSigned);
  CHECK_THROWS_AS(t.validate(), NumericError);  // 5 is out of [-1,1]
}

TEST_CASE("mask constructor fill and counts") {
  ValidityMask all(3, 4);
  CHECK(all.rows() == 3);
  CHECK(all.cols() == 4);
  CHECK(all.count_true() == 12);
  CHECK(all.all_true());
  CHECK(all.any_true());

  ValidityMask none(3, 4, false);
  CHECK(none.count_true() == 0);
  CHECK(!none.any_true());
  CHECK(!none.all_true());
}

TEST_CASE("mask set and at round-trip") {
  ValidityMask m(2, 3, false);
  m.set(1, 2, true);
  CHECK(m.at(1, 2));
  CHECK(!m.at(0, 0));
  CHECK(m.count_true() == 1);
  CHECK(m.any_true());
  m.set(1, 2, false);
  CHECK(!m.any_true());
}

TEST_CASE("mask matches tensor dims spatially") {
  ValidityMask m(4, 5);
  ImageTensor t(3, 4, 5, ValueDomain::kFree);
  ImageTensor w(3, 5, 4, ValueDomain::kFree);
  CHECK(m.same_dims(t));
  CHECK(!m.same_dims(w));
}

TEST_CASE("intersect is logical AND") {
  ValidityMask a(2, 2, false);
  ValidityMask b(2, 2, false);
  a.set(0, 0, true);
  a.set(0, 1, true);
  b.set(0, 1, true);
  b.set(1, 0, true);
  const ValidityMask c = a.intersect(b);
  CHECK(!c.at(0, 0));
  CHECK(c.at(0, 1));
  CHECK(!c.at(1, 0));
  CHECK(!c.at(1, 1));
  CHECK(c.count_true() == 1);
}

TEST_CASE("intersect rejects mismatched dims") {
  ValidityMask a(2, 2);
  ValidityMask b(2, 3);
  CHECK_THROWS_AS(a.intersect(b), DimensionError);
}

TEST_CASE("intersect with all-true is identity") {
  ValidityMask a(3, 3, false);
  a.set(1, 1, true);
  a.set(2, 0, true);
  ValidityMask full(3, 3, true);
  const ValidityMask c = a.intersect(full);
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 3; ++col) {
      CHECK(c.at(r, col) == a.at(r, col));
    }
  }
}
