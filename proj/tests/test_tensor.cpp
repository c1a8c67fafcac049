#include <doctest.h>

#include <cmath>
#include <vector>

#include "ctxnav/grad_check.hpp"
#include "ctxnav/rng.hpp"
#include "ctxnav/tensor.hpp"

using namespace ctxnav;

namespace {

Tensor randn_like(std::vector<int> shape, Rng& rng) {
    Tensor t = Tensor::zeros(shape);
    for (double& x : t.data()) x = rng.uniform(-1.0, 1.0);
    return t;
}

using Params = std::vector<std::pair<std::string, Tensor>>;

}  // namespace

TEST_CASE("construction_and_scalar_access") {
    Tensor z = Tensor::zeros({2, 3});
    CHECK(z.rank() == 2);
    CHECK(z.numel() == 6);
    for (double v : z.data()) CHECK(v == 0.0);

    Tensor f = Tensor::full({2, 2}, 1.5);
    CHECK(f.at(1, 1) == 1.5);

    Tensor s = Tensor::from({1}, {42.0});
    CHECK(s.item() == 42.0);
    CHECK_THROWS_AS(f.item(), NotScalarError);
}

TEST_CASE("matmul_and_shape_errors") {
    Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = matmul(a, b);
    REQUIRE(c.shape() == std::vector<int>{2, 2});
    CHECK(c.at(0, 0) == 58.0);
    CHECK(c.at(0, 1) == 64.0);
    CHECK(c.at(1, 0) == 139.0);
    CHECK(c.at(1, 1) == 154.0);

    CHECK_THROWS_AS(matmul(a, a), ShapeError);
    CHECK_THROWS_AS(add(a, b), ShapeError);
    CHECK_THROWS_AS(add_rowvec(a, Tensor::zeros({1, 2})), ShapeError);
    CHECK_THROWS_AS(narrow(a, 1, 2, 2), ShapeError);
    CHECK_THROWS_AS(reshape(a, {4, 2}), ShapeError);
}

TEST_CASE("elementwise_and_rowvec_ops") {
    Tensor a = Tensor::from({2, 2}, {1, -2, 3, -4});
    Tensor b = Tensor::from({2, 2}, {10, 20, 30, 40});
    CHECK(add(a, b).at(1, 1) == 36.0);
    CHECK(sub(b, a).at(0, 1) == 22.0);
    CHECK(mul(a, b).at(1, 0) == 90.0);
    CHECK(scale(a, -2.0).at(0, 0) == -2.0);

    Tensor v = Tensor::from({1, 2}, {100, 1000});
    CHECK(add_rowvec(a, v).at(1, 0) == 103.0);
    CHECK(mul_rowvec(a, v).at(0, 1) == -2000.0);

    Tensor r = relu(a);
    CHECK(r.at(0, 0) == 1.0);
    CHECK(r.at(0, 1) == 0.0);

    Tensor t = transpose(a);
    CHECK(t.shape() == std::vector<int>{2, 2});
    CHECK(t.at(0, 1) == 3.0);
}

TEST_CASE("concat_narrow_reshape") {
    Tensor a = Tensor::from({1, 2}, {1, 2});
    Tensor b = Tensor::from({1, 2}, {3, 4});
    Tensor v = concat({a, b}, 0);
    CHECK(v.shape() == std::vector<int>{2, 2});
    CHECK(v.at(1, 0) == 3.0);
    Tensor h = concat({a, b}, 1);
    CHECK(h.shape() == std::vector<int>{1, 4});
    CHECK(h.at(0, 3) == 4.0);

    Tensor n = narrow(v, 0, 1, 1);
    CHECK(n.shape() == std::vector<int>{1, 2});
    CHECK(n.at(0, 1) == 4.0);

    Tensor rs = reshape(h, {2, 2});
    CHECK(rs.at(1, 1) == 4.0);
}

TEST_CASE("softmax_rows_and_cols_sum_to_one") {
    Tensor a = Tensor::from({1, 2}, {0.0, std::log(3.0)});
    Tensor s = softmax(a, 1);
    CHECK(s.at(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(s.at(0, 1) == doctest::Approx(0.75).epsilon(1e-12));

    Rng rng(4);
    Tensor big = randn_like({5, 7}, rng);
    for (double& x : big.data()) x *= 50.0;  // exercise the max-subtraction
    Tensor rows = softmax(big, 1);
    for (int r = 0; r < 5; ++r) {
        double sum = 0.0;
        for (int c = 0; c < 7; ++c) sum += rows.at(r, c);
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
    Tensor cols = softmax(big, 0);
    for (int c = 0; c < 7; ++c) {
        double sum = 0.0;
        for (int r = 0; r < 5; ++r) sum += cols.at(r, c);
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("embedding_gathers_rows") {
    Tensor table = Tensor::from({4, 2}, {0, 1, 10, 11, 20, 21, 30, 31});
    std::vector<int> ids = {2, 0, 2};
    Tensor e = embedding(table, ids);
    REQUIRE(e.shape() == std::vector<int>{3, 2});
    CHECK(e.at(0, 0) == 20.0);
    CHECK(e.at(1, 1) == 1.0);
    CHECK(e.at(2, 0) == 20.0);
}

TEST_CASE("cross_entropy_of_uniform_logits_is_log_k") {
    Tensor logits = Tensor::zeros({2, 9});
    std::vector<int> targets = {3, 7};
    Tensor loss = cross_entropy_sum(logits, targets);
    CHECK(loss.item() == doctest::Approx(2.0 * std::log(9.0)).epsilon(1e-12));
}

TEST_CASE("conv2d_padding_and_counting") {
    // All-ones input, all-ones 3x3 kernel, pad 1: each output counts the
    // in-bounds neighbors, which on a 2x2 grid is always 4.
    Tensor x = Tensor::full({2, 2, 1}, 1.0);
    Tensor w = Tensor::full({1, 3, 3, 1}, 1.0);
    Tensor b = Tensor::zeros({1, 1});
    Tensor y = conv2d(x, w, b, 1);
    REQUIRE(y.shape() == std::vector<int>{2, 2, 1});
    for (double v : y.data()) CHECK(v == 4.0);

    // 1x1 kernel with bias acts per-cell.
    Tensor w1 = Tensor::full({1, 1, 1, 1}, 3.0);
    Tensor b1 = Tensor::full({1, 1}, 0.5);
    Tensor y1 = conv2d(x, w1, b1, 0);
    for (double v : y1.data()) CHECK(v == 3.5);
}

TEST_CASE("scatter_rows_sums_colocated_rows") {
    Tensor vals = Tensor::from({3, 2}, {1, 2, 10, 20, 100, 200});
    std::vector<int> cells = {0, 3, 0};
    Tensor m = scatter_rows(vals, cells, 2);
    REQUIRE(m.shape() == std::vector<int>{2, 2, 2});
    auto buf = m.data();
    CHECK(buf[0] == 101.0);  // cell 0, channel 0
    CHECK(buf[1] == 202.0);
    CHECK(buf[2] == 0.0);    // cell 1 empty
    CHECK(buf[3 * 2] == 10.0);  // cell 3
    CHECK(buf[3 * 2 + 1] == 20.0);
}

TEST_CASE("backward_accumulates_into_param_slots") {
    Tensor p = Tensor::from({2, 2}, {1, 2, 3, 4});
    p.set_param_slot(0);
    Tensor loss = sum_all(mul(p, p));
    GradSink sink;
    backward(loss, sink);
    REQUIRE(sink.slots.size() == 1);
    REQUIRE(sink.slots[0].size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(sink.slots[0][i] == 2.0 * (i + 1));

    // A second backward adds on top (per-example accumulation).
    backward(loss, sink);
    CHECK(sink.slots[0][3] == 16.0);
    sink.scale(0.5);
    CHECK(sink.slots[0][3] == 8.0);
    sink.reset();
    CHECK(sink.slots[0][0] == 0.0);
}

TEST_CASE("detach_blocks_gradient_flow") {
    Tensor p = Tensor::from({1, 2}, {3, 5});
    p.set_param_slot(0);
    Tensor loss = sum_all(mul(p.detach(), p.detach()));
    GradSink sink;
    backward(loss, sink);
    bool any = false;
    for (const auto& s : sink.slots)
        for (double g : s)
            if (g != 0.0) any = true;
    CHECK(!any);
}

TEST_CASE("no_grad_guard_disables_graph_building") {
    CHECK(grad_enabled());
    {
        NoGradGuard guard;
        CHECK(!grad_enabled());
        Tensor p = Tensor::from({1, 2}, {1, 2});
        p.set_param_slot(0);
        Tensor y = mul(p, p);
        CHECK(y.impl()->parents.empty());
    }
    CHECK(grad_enabled());
}

TEST_CASE("f32_mode_rounds_op_results_through_binary32") {
    Tensor a = Tensor::from({1, 1}, {0.1});
    Tensor b = Tensor::from({1, 1}, {0.2});
    set_precision(Precision::f32);
    double got = add(a, b).item();
    set_precision(Precision::f64);
    CHECK(got == static_cast<double>(static_cast<float>(0.1 + 0.2)));
    CHECK(add(a, b).item() == 0.1 + 0.2);
}

TEST_CASE("gradient_check_dense_ops") {
    Rng rng(21);
    Tensor a = randn_like({3, 4}, rng);
    Tensor b = randn_like({4, 2}, rng);
    Tensor v = randn_like({1, 2}, rng);
    Params params = {{"a", a}, {"b", b}, {"v", v}};
    auto f = [&] {
        Tensor h = tanh_op(add_rowvec(matmul(a, b), v));
        Tensor s = sigmoid(mul_rowvec(h, v));
        return sum_all(mul(s, h));
    };
    GradCheckReport rep = gradient_check(f, params, 1e-5, 1e-6);
    CHECK(rep.pass(1e-6));
}

TEST_CASE("gradient_check_softmax_and_cross_entropy") {
    Rng rng(22);
    Tensor logits = randn_like({4, 6}, rng);
    Tensor w = randn_like({6, 6}, rng);
    std::vector<int> targets = {1, 0, 5, 2};
    Params params = {{"logits", logits}, {"w", w}};
    auto f = [&] {
        Tensor z = matmul(softmax(logits, 1), w);
        Tensor cols = softmax(z, 0);
        return cross_entropy_sum(add(z, cols), targets);
    };
    GradCheckReport rep = gradient_check(f, params, 1e-5, 1e-6);
    CHECK(rep.pass(1e-6));
}

TEST_CASE("gradient_check_structure_ops") {
    Rng rng(23);
    Tensor table = randn_like({5, 3}, rng);
    Tensor m = randn_like({4, 3}, rng);
    std::vector<int> ids = {0, 2, 2, 4};
    Params params = {{"table", table}, {"m", m}};
    auto f = [&] {
        Tensor e = embedding(table, ids);            // repeated id: grads sum
        Tensor cat = concat({e, m}, 1);              // [4,6]
        Tensor top = narrow(transpose(cat), 0, 1, 4);  // [4,4]
        Tensor rs = reshape(top, {2, 8});
        return sum_all(mul(rs, rs));
    };
    GradCheckReport rep = gradient_check(f, params, 1e-5, 1e-6);
    CHECK(rep.pass(1e-6));
}

TEST_CASE("gradient_check_conv_and_scatter") {
    Rng rng(24);
    Tensor vals = randn_like({3, 2}, rng);
    Tensor w = randn_like({2, 3, 3, 2}, rng);
    Tensor b = randn_like({1, 2}, rng);
    std::vector<int> cells = {0, 5, 5};  // includes a collision
    Params params = {{"vals", vals}, {"w", w}, {"b", b}};
    auto f = [&] {
        Tensor grid = scatter_rows(vals, cells, 3);
        Tensor y = conv2d(grid, w, b, 1);
        Tensor flat = reshape(y, {9, 2});
        return sum_all(mul(flat, tanh_op(flat)));
    };
    GradCheckReport rep = gradient_check(f, params, 1e-5, 1e-6);
    CHECK(rep.pass(1e-6));
}

TEST_CASE("gradient_check_reductions") {
    Rng rng(25);
    Tensor a = randn_like({5, 3}, rng);
    Params params = {{"a", a}};
    auto f = [&] {
        Tensor mr = mean_rows(relu(a));
        return sum_all(mul(mr, mr));
    };
    GradCheckReport rep = gradient_check(f, params, 1e-5, 1e-6);
    CHECK(rep.pass(1e-6));
}
