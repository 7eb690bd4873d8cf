#include "doctest.h"

#include "helpers.hpp"
#include "rld/metrics.hpp"

#include <algorithm>
#include <cmath>

using namespace rld;

namespace {

// Teacher whose class-0 logit is the pixel sum and class-1 logit is 0, so
// p(class 0) = sigmoid(sum of pixels). Probabilities under deletion and
// insertion are then exact closed forms.
TeacherModel sum_teacher(std::size_t pixels) {
    TeacherModel model;
    DenseTensor eye = DenseTensor::zeros({pixels, pixels});
    for (std::size_t i = 0; i < pixels; ++i) eye(i, i) = 1.0f;
    model.l1.w = eye;
    model.l1.b = DenseTensor::zeros({pixels});
    DenseTensor head = DenseTensor::zeros({pixels, 2});
    for (std::size_t i = 0; i < pixels; ++i) head(i, 0) = 1.0f;
    model.l2.w = head;
    model.l2.b = DenseTensor::zeros({2});
    model.l1.zero_grad();
    model.l2.zero_grad();
    model.input_dim = pixels;
    model.num_classes = 2;
    model.epochs_trained = 1;
    return model;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("auc_trapezoid: hand values and input validation") {
    CHECK(auc_trapezoid({{0.0, 1.0}, {0.5, 1.0}, {1.0, 0.0}}) == doctest::Approx(0.75));
    CHECK(auc_trapezoid({{0.0, 0.3}, {1.0, 0.3}}) == doctest::Approx(0.3));
    CHECK(auc_trapezoid({{0.2, 0.0}, {0.7, 1.0}}) == doctest::Approx(0.25));
    CHECK_THROWS_AS(auc_trapezoid({}), ParamError);
    CHECK_THROWS_AS(auc_trapezoid({{0.0, 1.0}}), ParamError);
    CHECK_THROWS_AS(auc_trapezoid({{0.0, 1.0}, {0.0, 0.5}}), ParamError);
    CHECK_THROWS_AS(auc_trapezoid({{0.5, 1.0}, {0.2, 0.5}}), ParamError);
}

TEST_CASE("deletion_curve matches the closed form on the sum teacher") {
    const TeacherModel teacher = sum_teacher(4);
    const DenseTensor anchor({4}, {0.8f, 0.6f, 0.4f, 0.2f});
    const ImageShape shape{2, 2, 1};
    const std::vector<std::size_t> order{0, 1, 2, 3};

    const PerturbationCurve curve = deletion_curve(teacher, anchor, shape, order, 0.25, 0.0f);
    REQUIRE(curve.points.size() == 5);
    const double expected_p[5] = {sig(2.0), sig(1.2), sig(0.6), sig(0.2), 0.5};
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(curve.points[i].first == doctest::Approx(0.25 * i));
        CHECK(curve.points[i].second == doctest::Approx(expected_p[i]).epsilon(1e-5));
    }
    CHECK(curve.auc == doctest::Approx(0.663603).epsilon(1e-4));
}

TEST_CASE("insertion_curve matches the closed form on the sum teacher") {
    const TeacherModel teacher = sum_teacher(4);
    const DenseTensor anchor({4}, {0.8f, 0.6f, 0.4f, 0.2f});
    const ImageShape shape{2, 2, 1};
    const std::vector<std::size_t> order{0, 1, 2, 3};

    const PerturbationCurve curve = insertion_curve(teacher, anchor, shape, order, 0.25, 0.0f);
    REQUIRE(curve.points.size() == 5);
    const double expected_p[5] = {0.5, sig(0.8), sig(1.4), sig(1.8), sig(2.0)};
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(curve.points[i].first == doctest::Approx(0.25 * i));
        CHECK(curve.points[i].second == doctest::Approx(expected_p[i]).epsilon(1e-5));
    }
}

TEST_CASE("informed orderings beat their reverses on both curves") {
    const TeacherModel teacher = sum_teacher(4);
    const DenseTensor anchor({4}, {0.8f, 0.6f, 0.4f, 0.2f});
    const ImageShape shape{2, 2, 1};
    const std::vector<std::size_t> best{0, 1, 2, 3};
    const std::vector<std::size_t> worst{3, 2, 1, 0};

    CHECK(deletion_curve(teacher, anchor, shape, best, 0.25, 0.0f).auc <
          deletion_curve(teacher, anchor, shape, worst, 0.25, 0.0f).auc);
    CHECK(insertion_curve(teacher, anchor, shape, best, 0.25, 0.0f).auc >
          insertion_curve(teacher, anchor, shape, worst, 0.25, 0.0f).auc);
}

TEST_CASE("curve endpoints are the clean and fully perturbed probabilities") {
    const TeacherModel teacher = sum_teacher(9);
    DenseTensor anchor = DenseTensor::zeros({9});
    for (std::size_t i = 0; i < 9; ++i) anchor.data[i] = 0.1f * static_cast<float>(i);
    const ImageShape shape{3, 3, 1};
    std::vector<std::size_t> order{4, 1, 7, 0, 8, 2, 6, 3, 5};

    const double p_clean = predict_proba(teacher, anchor).data[0];
    const DenseTensor blank = DenseTensor::full({9}, 0.25f);
    const double p_blank = predict_proba(teacher, blank).data[0];

    const PerturbationCurve del = deletion_curve(teacher, anchor, shape, order, 0.3, 0.25f);
    CHECK(del.points.front().first == 0.0);
    CHECK(del.points.front().second == doctest::Approx(p_clean));
    CHECK(del.points.back().first == 1.0);
    CHECK(del.points.back().second == doctest::Approx(p_blank));

    const PerturbationCurve ins = insertion_curve(teacher, anchor, shape, order, 0.3, 0.25f);
    CHECK(ins.points.front().second == doctest::Approx(p_blank));
    CHECK(ins.points.back().second == doctest::Approx(p_clean));

    // fractions climb strictly regardless of step rounding
    for (std::size_t i = 0; i + 1 < del.points.size(); ++i)
        CHECK(del.points[i].first < del.points[i + 1].first);

    // a whole-image step yields exactly the two endpoints
    const PerturbationCurve one = deletion_curve(teacher, anchor, shape, order, 1.0, 0.25f);
    CHECK(one.points.size() == 2);
}

TEST_CASE("curves reject bad orderings and step fractions") {
    const TeacherModel teacher = sum_teacher(4);
    const DenseTensor anchor({4}, {0.8f, 0.6f, 0.4f, 0.2f});
    const ImageShape shape{2, 2, 1};
    const std::vector<std::size_t> order{0, 1, 2, 3};

    CHECK_THROWS_AS(deletion_curve(teacher, anchor, shape, {0, 1, 2}, 0.25, 0.0f), ParamError);
    CHECK_THROWS_AS(deletion_curve(teacher, anchor, shape, {0, 0, 1, 2}, 0.25, 0.0f), ParamError);
    CHECK_THROWS_AS(deletion_curve(teacher, anchor, shape, {0, 1, 2, 4}, 0.25, 0.0f), ParamError);
    CHECK_THROWS_AS(deletion_curve(teacher, anchor, shape, order, 0.0, 0.0f), ParamError);
    CHECK_THROWS_AS(deletion_curve(teacher, anchor, shape, order, 1.5, 0.0f), ParamError);
    CHECK_THROWS_AS(insertion_curve(teacher, anchor, shape, order, -0.2, 0.0f), ParamError);
    CHECK_THROWS_AS(
        deletion_curve(teacher, DenseTensor::zeros({6}), shape, order, 0.25, 0.0f), ShapeError);
}

TEST_CASE("occlusion_saliency credits each pixel with its exact drop") {
    const TeacherModel teacher = sum_teacher(4);
    const DenseTensor anchor({4}, {0.8f, 0.6f, 0.4f, 0.2f});
    const ImageShape shape{2, 2, 1};

    const SaliencyMap map = occlusion_saliency(teacher, anchor, shape, 1, 1, 0.0f);
    const double drops[4] = {sig(2.0) - sig(1.2), sig(2.0) - sig(1.4), sig(2.0) - sig(1.6),
                             sig(2.0) - sig(1.8)};
    REQUIRE(map.raw.size() == 4);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(map.raw.data[i] == doctest::Approx(drops[i]).epsilon(1e-4));
    CHECK(map.ordering == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(map.normalized.data[0] == 1.0f);
    CHECK(map.normalized.data[3] == 0.0f);
}

TEST_CASE("occlusion window covering the whole image flattens the map") {
    const TeacherModel teacher = sum_teacher(9);
    DenseTensor anchor = DenseTensor::zeros({9});
    for (std::size_t i = 0; i < 9; ++i) anchor.data[i] = 0.1f * static_cast<float>(i + 1);
    const ImageShape shape{3, 3, 1};
    const SaliencyMap map = occlusion_saliency(teacher, anchor, shape, 3, 1, 0.0f);
    for (float v : map.normalized.data) CHECK(v == 0.5f);
}

TEST_CASE("occlusion_saliency validates window and stride") {
    const TeacherModel teacher = sum_teacher(4);
    const DenseTensor anchor({4}, {0.8f, 0.6f, 0.4f, 0.2f});
    const ImageShape shape{2, 2, 1};
    CHECK_THROWS_AS(occlusion_saliency(teacher, anchor, shape, 2, 1, 0.0f), ParamError);
    CHECK_THROWS_AS(occlusion_saliency(teacher, anchor, shape, 3, 1, 0.0f), ParamError);
    CHECK_THROWS_AS(occlusion_saliency(teacher, anchor, shape, 1, 0, 0.0f), ParamError);
    CHECK_THROWS_AS(occlusion_saliency(teacher, DenseTensor::zeros({5}), shape, 1, 1, 0.0f),
                    ShapeError);
}

TEST_CASE("random_ordering is a deterministic uniform permutation") {
    Rng r1(11), r2(11), r3(12);
    const auto a = random_ordering(4, 5, r1);
    const auto b = random_ordering(4, 5, r2);
    const auto c = random_ordering(4, 5, r3);
    CHECK(a.size() == 20);
    CHECK(a == b);
    CHECK(a != c);
    std::vector<std::size_t> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);

    Rng tiny(1);
    const auto single = random_ordering(1, 1, tiny);
    CHECK(single.size() == 1);
    CHECK(single[0] == 0);
}

} // TEST_SUITE
