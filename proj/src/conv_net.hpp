#pragma once

// Circular 1-D convolutional residual network with a hand-written
// reverse pass. Activations are (batch * points) x channels row-major
// matrices, so each convolution is an im2col gather followed by one GEMM.

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <vector>

#include "diffassim/denoiser.hpp"

namespace diffassim::detail {

template <class T>
class ConvNet {
public:
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Row = Eigen::Matrix<T, 1, Eigen::Dynamic>;
    using CMap = Eigen::Map<const Mat>;
    using GMap = Eigen::Map<Mat>;

    ConvNet(const DenoiserArch& arch, std::span<const T> theta) : arch_(arch), theta_(theta) {
        arch_.validate();
        groups_ = parameter_groups(arch_);
        if (theta_.size() != parameter_count(arch_)) {
            throw UsageError("ConvNet: parameter vector does not match architecture");
        }
        // Owned copies keep every product on aligned storage, so results do
        // not depend on where theta happens to live.
        weights_.reserve(groups_.size());
        for (const auto& pg : groups_) weights_.push_back(CMap(theta_.data() + pg.offset, pg.rows, pg.cols));
    }

    /// Runs the network and caches what the reverse pass needs. `out` is
    /// batch x levels x points.
    void forward(int batch, int points, std::span<const T> x_j, std::span<const T> xhat, std::span<const int> steps,
                 std::span<T> out) {
        const int L = arch_.levels;
        const int K = points;
        const std::size_t per = static_cast<std::size_t>(L) * K;
        if (batch < 1 || K < 1) throw UsageError("eps_forward: empty batch");
        if (x_j.size() != per * batch || xhat.size() != per * batch || out.size() != per * batch ||
            steps.size() != static_cast<std::size_t>(batch)) {
            throw UsageError("eps_forward: shape mismatch");
        }
        batch_ = batch;
        points_ = K;
        const int rows = batch * K;

        Mat input(rows, 2 * L);
        for (int b = 0; b < batch; ++b) {
            for (int l = 0; l < L; ++l) {
                for (int k = 0; k < K; ++k) {
                    input(b * K + k, l) = x_j[b * per + l * K + k];
                    input(b * K + k, L + l) = xhat[b * per + l * K + k];
                }
            }
        }

        embed_.resize(batch, arch_.embed_dim);
        for (int b = 0; b < batch; ++b) {
            const auto e = step_embedding(steps[b], arch_.embed_dim);
            for (int i = 0; i < arch_.embed_dim; ++i) embed_(b, i) = static_cast<T>(e[i]);
        }

        std::size_t g = 0;
        im2col(input, col_in_);
        Mat h = col_in_ * weight(g);
        h.rowwise() += bias(g + 1);
        const Mat temb = (embed_ * weight(g + 2)).rowwise() + bias(g + 3);
        for (int b = 0; b < batch; ++b) h.middleRows(b * K, K).rowwise() += temb.row(b);
        g += 4;

        const int B = arch_.blocks;
        h_.assign(B + 1, Mat());
        u_.assign(B, Mat());
        col1_.assign(B, Mat());
        col2_.assign(B, Mat());
        h_[0] = std::move(h);
        for (int i = 0; i < B; ++i) {
            im2col(silu(h_[i]), col1_[i]);
            u_[i] = col1_[i] * weight(g);
            u_[i].rowwise() += bias(g + 1);
            im2col(silu(u_[i]), col2_[i]);
            Mat v = col2_[i] * weight(g + 2);
            v.rowwise() += bias(g + 3);
            h_[i + 1] = h_[i] + v;
            g += 4;
        }
        im2col(silu(h_[B]), col_out_);
        Mat y = col_out_ * weight(g);
        y.rowwise() += bias(g + 1);

        for (int b = 0; b < batch; ++b) {
            for (int l = 0; l < L; ++l) {
                for (int k = 0; k < K; ++k) out[b * per + l * K + k] = y(b * K + k, l);
            }
        }
    }

    /// Accumulates d(loss)/d(theta) into `grad` given d(loss)/d(out).
    void backward(std::span<const T> d_out, std::span<T> grad) {
        const int L = arch_.levels;
        const int K = points_;
        const int batch = batch_;
        const std::size_t per = static_cast<std::size_t>(L) * K;
        if (grad.size() != theta_.size() || d_out.size() != per * batch) {
            throw UsageError("ConvNet::backward: shape mismatch");
        }
        const int rows = batch * K;
        Mat dy(rows, L);
        for (int b = 0; b < batch; ++b) {
            for (int l = 0; l < L; ++l) {
                for (int k = 0; k < K; ++k) dy(b * K + k, l) = d_out[b * per + l * K + k];
            }
        }

        const int B = arch_.blocks;
        std::size_t g = 4 + 4 * static_cast<std::size_t>(B);
        Mat dh = conv_backward(col_out_, dy, g, grad);
        dh.array() *= silu_grad(h_[B]).array();

        for (int i = B - 1; i >= 0; --i) {
            g -= 4;
            Mat du = conv_backward(col2_[i], dh, g + 2, grad);
            du.array() *= silu_grad(u_[i]).array();
            Mat dh_inner = conv_backward(col1_[i], du, g, grad);
            dh.array() += dh_inner.array() * silu_grad(h_[i]).array();
        }

        // Input convolution; the input gradient itself is not needed.
        gmap(0, grad) += Mat(col_in_.transpose() * dh);
        gmap(1, grad) += Row(dh.colwise().sum());
        Mat dtemb(batch, arch_.hidden);
        for (int b = 0; b < batch; ++b) dtemb.row(b) = dh.middleRows(b * K, K).colwise().sum();
        gmap(2, grad) += Mat(embed_.transpose() * dtemb);
        gmap(3, grad) += Row(dtemb.colwise().sum());
    }

private:
    const Mat& weight(std::size_t g) const { return weights_[g]; }
    Eigen::Map<const Row> bias(std::size_t g) const {
        const auto& pg = groups_[g];
        return Eigen::Map<const Row>(theta_.data() + pg.offset, pg.cols);
    }
    GMap gmap(std::size_t g, std::span<T> grad) const {
        const auto& pg = groups_[g];
        return GMap(grad.data() + pg.offset, pg.rows, pg.cols);
    }

    // Weight/bias gradients of y = col * W + b, returns d(loss)/d(input activation).
    Mat conv_backward(const Mat& col, const Mat& dy, std::size_t g, std::span<T> grad) const {
        gmap(g, grad) += Mat(col.transpose() * dy);
        gmap(g + 1, grad) += Row(dy.colwise().sum());
        const Mat dcol = dy * weight(g).transpose();
        return col2im(dcol);
    }

    void im2col(const Mat& a, Mat& col) const {
        const int K = points_;
        const int C = static_cast<int>(a.cols());
        const int w = arch_.kernel;
        const int half = w / 2;
        col.resize(a.rows(), static_cast<Eigen::Index>(w) * C);
        for (int b = 0; b < batch_; ++b) {
            for (int k = 0; k < K; ++k) {
                for (int o = 0; o < w; ++o) {
                    const int src = wrap(k + o - half, K);
                    col.row(b * K + k).segment(o * C, C) = a.row(b * K + src);
                }
            }
        }
    }

    Mat col2im(const Mat& col) const {
        const int K = points_;
        const int w = arch_.kernel;
        const int half = w / 2;
        const int C = static_cast<int>(col.cols()) / w;
        Mat a = Mat::Zero(col.rows(), C);
        for (int b = 0; b < batch_; ++b) {
            for (int k = 0; k < K; ++k) {
                for (int o = 0; o < w; ++o) {
                    const int dst = wrap(k + o - half, K);
                    a.row(b * K + dst) += col.row(b * K + k).segment(o * C, C);
                }
            }
        }
        return a;
    }

    static int wrap(int i, int K) { return ((i % K) + K) % K; }

    static Mat silu(const Mat& x) {
        return (x.array() / (T(1) + (-x.array()).exp())).matrix();
    }
    static Mat silu_grad(const Mat& x) {
        const auto s = (T(1) / (T(1) + (-x.array()).exp())).eval();
        return (s * (T(1) + x.array() * (T(1) - s))).matrix();
    }

    DenoiserArch arch_;
    std::span<const T> theta_;
    std::vector<ParamGroup> groups_;
    std::vector<Mat> weights_;
    int batch_ = 0;
    int points_ = 0;
    Mat embed_;
    Mat col_in_;
    Mat col_out_;
    std::vector<Mat> h_, u_, col1_, col2_;
};

}  // namespace diffassim::detail
