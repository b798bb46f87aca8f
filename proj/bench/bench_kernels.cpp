// Wall-time comparison of the OpenMP kernels against their serial reference
// twins on transformer-shaped operands, plus whole-model forward/backward
// timing. Outputs one line per case; exits nonzero if any kernel disagrees
// with its reference.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "lenslab/kernels.hpp"
#include "lenslab/model.hpp"
#include "lenslab/rng.hpp"
#include "lenslab/tensor.hpp"
#include "lenslab/text.hpp"

using namespace lenslab;

namespace {

Matrix random_matrix(int rows, int cols, SeededRng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.normal();
    return m;
}

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up, also sizes any lazily allocated outputs
    const auto start = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

bool g_all_equal = true;

void report(const std::string& name, double parallel_ms, double serial_ms, bool equal) {
    std::printf("%-34s %10.4f ms %10.4f ms   x%5.2f   %s\n", name.c_str(), parallel_ms,
                serial_ms, serial_ms / parallel_ms, equal ? "outputs equal" : "OUTPUTS DIFFER");
    g_all_equal = g_all_equal && equal;
}

} // namespace

int main() {
    SeededRng rng(7);

    // Shapes mirror the default model: d_model 64, d_ff 128, vocabulary ~442,
    // sequence length ~96 (a three-exemplar judge prompt).
    const int n = 96, d = 64, ff = 128, v = 442;
    const Matrix x = random_matrix(n, d, rng);        // residual block input
    const Matrix w = random_matrix(d, d, rng);        // square projection
    const Matrix wu = random_matrix(d, v, rng);       // unembedding
    const Matrix w1 = random_matrix(d, ff, rng);      // MLP expand
    const Matrix dy = random_matrix(n, v, rng);       // logits gradient
    const Matrix dh = random_matrix(n, ff, rng);      // MLP hidden gradient
    std::vector<double> gain(static_cast<size_t>(d));
    for (double& g : gain) g = 1.0 + 0.1 * rng.normal();

    std::printf("%-34s %13s %13s %8s\n", "case", "parallel", "serial", "speedup");

    Matrix c1, c2;
    report("matmul (n x d)(d x d)",
           time_ms([&] { kernels::matmul(x, w, c1); }, 400),
           time_ms([&] { kernels::ref::matmul(x, w, c2); }, 400), c1.data == c2.data);
    report("matmul (n x d)(d x vocab)",
           time_ms([&] { kernels::matmul(x, wu, c1); }, 200),
           time_ms([&] { kernels::ref::matmul(x, wu, c2); }, 200), c1.data == c2.data);
    report("matmul_nt scores (n x d)(n x d)T",
           time_ms([&] { kernels::matmul_nt(x, x, c1); }, 400),
           time_ms([&] { kernels::ref::matmul_nt(x, x, c2); }, 400), c1.data == c2.data);
    report("matmul_nt dlogits (n x v)(d x v)T",
           time_ms([&] { kernels::matmul_nt(dy, wu, c1); }, 200),
           time_ms([&] { kernels::ref::matmul_nt(dy, wu, c2); }, 200), c1.data == c2.data);

    Matrix acc1(d, ff), acc2(d, ff);
    acc1.fill(0.0);
    acc2.fill(0.0);
    report("matmul_tn_acc dW (n x d)T(n x ff)",
           time_ms([&] { kernels::matmul_tn_acc(x, dh, acc1); }, 400),
           time_ms([&] { kernels::ref::matmul_tn_acc(x, dh, acc2); }, 400),
           acc1.data == acc2.data);

    Matrix nacc1(n, d), nacc2(n, d);
    nacc1.fill(0.0);
    nacc2.fill(0.0);
    report("matmul_nt_acc dX (n x ff)(d x ff)T",
           time_ms([&] { kernels::matmul_nt_acc(dh, w1, nacc1); }, 400),
           time_ms([&] { kernels::ref::matmul_nt_acc(dh, w1, nacc2); }, 400),
           nacc1.data == nacc2.data);

    Matrix y1, y2;
    std::vector<double> r1, r2;
    report("rmsnorm_rows (n x d)",
           time_ms([&] { kernels::rmsnorm_rows(x, gain, y1, r1); }, 2000),
           time_ms([&] { kernels::ref::rmsnorm_rows(x, gain, y2, r2); }, 2000),
           y1.data == y2.data && r1 == r2);

    Matrix dx1(n, d), dx2(n, d);
    dx1.fill(0.0);
    dx2.fill(0.0);
    std::vector<double> dg1(static_cast<size_t>(d), 0.0), dg2(static_cast<size_t>(d), 0.0);
    const Matrix dyn = random_matrix(n, d, rng);
    report("rmsnorm_backward_rows (n x d)",
           time_ms([&] { kernels::rmsnorm_backward_rows(x, r1, gain, dyn, dx1, dg1.data()); },
                   1000),
           time_ms(
               [&] { kernels::ref::rmsnorm_backward_rows(x, r2, gain, dyn, dx2, dg2.data()); },
               1000),
           dx1.data == dx2.data && dg1 == dg2);

    // Whole-model cost per sequence, the number the training budget rests on.
    ModelConfig mc;
    mc.vocab_size = v;
    mc.init_seed = 11;
    const TransformerModel model = init_model(mc);
    TokenSequence seq;
    seq.ids.push_back(0);
    for (int i = 1; i < n; ++i)
        seq.ids.push_back(4 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(v - 4))));

    const double fwd_ms = time_ms([&] { (void)forward(model, seq); }, 20);
    TransformerModel grads = zeros_like_model(mc);
    const double bwd_ms =
        time_ms([&] { (void)lm_loss_and_grads(model, seq, grads, 1.0); }, 10);
    std::printf("%-34s %10.4f ms\n", "model forward (96 tokens)", fwd_ms);
    std::printf("%-34s %10.4f ms\n", "model loss+grads (96 tokens)", bwd_ms);

    if (!g_all_equal) {
        std::fprintf(stderr, "kernel/reference mismatch detected\n");
        return 1;
    }
    return 0;
}
