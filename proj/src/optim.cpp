#include "searchlab/optim.hpp"

#include <cmath>
#include <cstring>

#include "searchlab/kernels.hpp"

namespace searchlab {

double lr_at(std::int64_t step, std::int64_t total_steps, double base_lr, double warmdown_ratio) {
    if (total_steps <= 0) return base_lr;
    double frac = double(step) / double(total_steps);
    double cutoff = 1.0 - warmdown_ratio;
    if (frac < cutoff) return base_lr;
    if (warmdown_ratio <= 0.0) return frac >= 1.0 ? 0.0 : base_lr;
    return base_lr * std::max(0.0, (1.0 - frac) / warmdown_ratio);
}

double wd_at(std::int64_t step, std::int64_t total_steps, double base_wd) {
    if (total_steps <= 0) return base_wd;
    return base_wd * std::max(0.0, 1.0 - double(step) / double(total_steps));
}

void newton_schulz_orthogonalize(double* m, int rows, int cols, int iters) {
    const std::size_t total = std::size_t(rows) * std::size_t(cols);
    // Work on X with rows <= cols so A = XXᵀ is the small Gram matrix;
    // the iteration commutes with transposition.
    const bool transposed = rows > cols;
    const int r = transposed ? cols : rows;
    const int c = transposed ? rows : cols;
    std::vector<double> x(total);
    if (transposed) {
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                x[std::size_t(j) * rows + i] = m[std::size_t(i) * cols + j];
    } else {
        std::memcpy(x.data(), m, total * sizeof(double));
    }
    // Reduce over the canonical layout so orthogonalizing M and Mᵀ give
    // bit-identical transposed results regardless of input orientation.
    double fro = std::sqrt(kernels::sum_sq(x.data(), total));
    if (fro == 0.0) return;
    kernels::scale(1.0 / (fro + 1e-7), x.data(), total);

    std::vector<double> a(std::size_t(r) * r), b(std::size_t(r) * r), bx(total);
    for (int it = 0; it < iters; ++it) {
        kernels::matmul_nt(a.data(), x.data(), x.data(), r, c, r);           // A = XXᵀ
        kernels::matmul_nn(b.data(), a.data(), a.data(), r, r, r);           // A²
        for (std::size_t i = 0; i < b.size(); ++i)
            b[i] = kNewtonSchulzB * a[i] + kNewtonSchulzC * b[i];
        kernels::matmul_nn(bx.data(), b.data(), x.data(), r, r, c);          // (bA + cA²)X
        kernels::scale(kNewtonSchulzA, x.data(), total);
        kernels::axpy(1.0, bx.data(), x.data(), total);
    }

    if (transposed) {
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                m[std::size_t(i) * cols + j] = x[std::size_t(j) * rows + i];
    } else {
        std::memcpy(m, x.data(), total * sizeof(double));
    }
}

MuonAdamW::MuonAdamW(const ParamLayout& layout, const HPConfig& hp) : layout_(layout), hp_(hp) {
    momentum_.assign(layout_.total_elements, 0.0);
    exp_avg_.assign(layout_.total_elements, 0.0);
    exp_avg_sq_.assign(layout_.total_elements, 0.0);
}

double MuonAdamW::base_lr_for(const TensorSpec& t) const {
    switch (t.group) {
        case ParamGroup::embedding: return hp_.lr_embedding;
        case ParamGroup::unembedding: return hp_.lr_unembedding;
        case ParamGroup::matrix: return hp_.lr_matrix;
        case ParamGroup::scalar: return hp_.lr_scalar;
    }
    return hp_.lr_matrix;
}

void MuonAdamW::step(ModelParams& params, const std::vector<double>& grads, double schedule_frac) {
    if (grads.size() != layout_.total_elements)
        throw config_error("gradient size does not match parameter layout");
    schedule_frac = std::min(1.0, std::max(0.0, schedule_frac));
    const double lr_fac =
        schedule_frac < (1.0 - hp_.warmdown_ratio)
            ? 1.0
            : (hp_.warmdown_ratio > 0.0 ? (1.0 - schedule_frac) / hp_.warmdown_ratio
                                        : (schedule_frac >= 1.0 ? 0.0 : 1.0));
    const double wd = hp_.weight_decay * (1.0 - schedule_frac);

    ++step_;
    const double bc1 = 1.0 - std::pow(hp_.adam_beta1, double(step_));
    const double bc2 = 1.0 - std::pow(hp_.adam_beta2, double(step_));

    std::vector<double> update;
    for (std::size_t ti = 0; ti < layout_.tensors.size(); ++ti) {
        const TensorSpec& t = layout_.tensors[ti];
        if (!frozen_.empty() && frozen_[ti]) continue;
        double* p = params.data.data() + t.offset;
        const double* g = grads.data() + t.offset;
        const double lr = base_lr_for(t) * lr_fac;
        if (t.group == ParamGroup::matrix) {
            double* buf = momentum_.data() + t.offset;
            for (std::size_t e = 0; e < t.size(); ++e)
                buf[e] = kMuonMomentum * buf[e] + g[e];
            update.assign(buf, buf + t.size());
            newton_schulz_orthogonalize(update.data(), t.rows, t.cols, kNewtonSchulzIters);
            double scale = std::sqrt(std::max(1.0, double(t.rows) / double(t.cols)));
            for (std::size_t e = 0; e < t.size(); ++e) p[e] -= lr * scale * update[e];
        } else {
            double* m = exp_avg_.data() + t.offset;
            double* v = exp_avg_sq_.data() + t.offset;
            for (std::size_t e = 0; e < t.size(); ++e) {
                m[e] = hp_.adam_beta1 * m[e] + (1.0 - hp_.adam_beta1) * g[e];
                v[e] = hp_.adam_beta2 * v[e] + (1.0 - hp_.adam_beta2) * g[e] * g[e];
                double mhat = m[e] / bc1;
                double vhat = v[e] / bc2;
                p[e] = p[e] * (1.0 - lr * wd) - lr * mhat / (std::sqrt(vhat) + kAdamEps);
            }
        }
    }
}

void MuonAdamW::set_frozen(const std::vector<std::string>& tensor_names) {
    frozen_.assign(layout_.tensors.size(), false);
    for (const std::string& name : tensor_names) {
        bool found = false;
        for (std::size_t ti = 0; ti < layout_.tensors.size(); ++ti) {
            if (layout_.tensors[ti].name == name) {
                frozen_[ti] = true;
                found = true;
                break;
            }
        }
        if (!found) throw config_error("cannot freeze unknown tensor: " + name);
    }
}

std::vector<NamedTensor> MuonAdamW::state_tensors() const {
    std::vector<NamedTensor> out;
    {
        NamedTensor t;
        t.name = "optim.step";
        t.rows = 1;
        t.cols = 1;
        t.data = {double(step_)};
        out.push_back(std::move(t));
    }
    auto slice = [this](const char* prefix, const std::vector<double>& arena, const TensorSpec& spec) {
        NamedTensor t;
        t.name = std::string(prefix) + spec.name;
        t.rows = spec.rows;
        t.cols = spec.cols;
        t.data.assign(arena.begin() + long(spec.offset), arena.begin() + long(spec.offset + spec.size()));
        return t;
    };
    for (const TensorSpec& spec : layout_.tensors) {
        if (spec.group == ParamGroup::matrix) {
            out.push_back(slice("optim.momentum.", momentum_, spec));
        } else {
            out.push_back(slice("optim.exp_avg.", exp_avg_, spec));
            out.push_back(slice("optim.exp_avg_sq.", exp_avg_sq_, spec));
        }
    }
    return out;
}

void MuonAdamW::load_state(const CheckpointContents& contents) {
    const NamedTensor* s = contents.find("optim.step");
    if (!s) throw io_error("checkpoint has no optimizer state");
    step_ = std::int64_t(std::llround(s->data.at(0)));
    auto fill = [&contents](const char* prefix, std::vector<double>& arena, const TensorSpec& spec) {
        const NamedTensor* t = contents.find(std::string(prefix) + spec.name);
        if (!t) throw io_error(std::string("checkpoint missing ") + prefix + spec.name);
        if (t->data.size() != spec.size())
            throw io_error(std::string("optimizer state shape mismatch: ") + spec.name);
        std::memcpy(arena.data() + spec.offset, t->data.data(), t->data.size() * sizeof(double));
    };
    for (const TensorSpec& spec : layout_.tensors) {
        if (spec.group == ParamGroup::matrix) {
            fill("optim.momentum.", momentum_, spec);
        } else {
            fill("optim.exp_avg.", exp_avg_, spec);
            fill("optim.exp_avg_sq.", exp_avg_sq_, spec);
        }
    }
}

}  // namespace searchlab
