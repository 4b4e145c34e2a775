#include "searchlab/model.hpp"

#include <cmath>
#include <cstring>

#include "searchlab/kernels.hpp"

namespace searchlab {

namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string layer_tensor(int l, const char* field) {
    return "layers." + std::to_string(l) + "." + field;
}

}  // namespace

std::string to_string(ParamGroup g) {
    switch (g) {
        case ParamGroup::embedding: return "embedding";
        case ParamGroup::unembedding: return "unembedding";
        case ParamGroup::matrix: return "matrix";
        case ParamGroup::scalar: return "scalar";
    }
    return "?";
}

int ffn_hidden_dim(const ArchConfig& arch) {
    return std::max(1, int(std::lround(arch.ffn_mult * arch.width)));
}

int layer_window(const ArchConfig& arch, int layer, int seq_len) {
    if (arch.attention_pattern == AttentionPattern::full) return seq_len;
    WindowTag tag = arch.window_cycle[std::size_t(layer) % arch.window_cycle.size()];
    if (tag == WindowTag::long_window) return seq_len;
    return std::min(arch.window_size, seq_len);
}

bool layer_has_value_embedding(const ArchConfig& arch, int layer) {
    switch (arch.value_embeddings) {
        case ValueEmbeddings::off: return false;
        case ValueEmbeddings::alternating: return layer % 2 == 0;
        case ValueEmbeddings::every_layer: return true;
    }
    return false;
}

ParamLayout ParamLayout::build(const ArchConfig& arch, int vocab_size) {
    ParamLayout lay;
    const int D = arch.width;
    const int hd = arch.head_dim();
    const int Dq = arch.heads * hd;
    const int KVD = arch.kv_heads * hd;
    const int F = ffn_hidden_dim(arch);
    const int Fout = activation_is_gated(arch.activation) ? 2 * F : F;
    const bool learned_res = arch.residual_scaling == ResidualScaling::learned_per_layer;

    auto add = [&lay](const std::string& name, int rows, int cols, ParamGroup group) {
        TensorSpec t;
        t.name = name;
        t.rows = rows;
        t.cols = cols;
        t.group = group;
        t.offset = lay.total_elements;
        lay.total_elements += t.size();
        lay.tensors.push_back(std::move(t));
    };

    add("token_embedding", vocab_size, D, ParamGroup::embedding);
    if (arch.value_embeddings != ValueEmbeddings::off)
        add("value_embedding", vocab_size, KVD, ParamGroup::embedding);
    for (int l = 0; l < arch.depth; ++l) {
        add(layer_tensor(l, "attn_q"), Dq, D, ParamGroup::matrix);
        add(layer_tensor(l, "attn_k"), KVD, D, ParamGroup::matrix);
        add(layer_tensor(l, "attn_v"), KVD, D, ParamGroup::matrix);
        add(layer_tensor(l, "attn_o"), D, Dq, ParamGroup::matrix);
        add(layer_tensor(l, "mlp_in"), Fout, D, ParamGroup::matrix);
        add(layer_tensor(l, "mlp_out"), D, F, ParamGroup::matrix);
        add(layer_tensor(l, "gain_attn"), 1, D, ParamGroup::scalar);
        add(layer_tensor(l, "gain_mlp"), 1, D, ParamGroup::scalar);
        if (learned_res) {
            add(layer_tensor(l, "resid_attn"), 1, 1, ParamGroup::scalar);
            add(layer_tensor(l, "resid_mlp"), 1, 1, ParamGroup::scalar);
        }
        if (layer_has_value_embedding(arch, l))
            add(layer_tensor(l, "ve_gate"), 1, KVD, ParamGroup::scalar);
    }
    add("final_gain", 1, D, ParamGroup::scalar);
    if (!arch.weight_tying) add("unembedding", vocab_size, D, ParamGroup::unembedding);
    return lay;
}

bool ParamLayout::has(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return true;
    return false;
}

const TensorSpec& ParamLayout::at(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return t;
    throw config_error("unknown tensor: " + name);
}

ModelParams ModelParams::init(const ArchConfig& arch, int vocab_size, std::uint64_t seed) {
    ModelParams p;
    p.arch = arch;
    p.vocab_size = vocab_size;
    p.layout = ParamLayout::build(arch, vocab_size);
    p.data.assign(p.layout.total_elements, 0.0);
    for (std::size_t i = 0; i < p.layout.tensors.size(); ++i) {
        const TensorSpec& t = p.layout.tensors[i];
        double* dst = p.data.data() + t.offset;
        Rng rng(derive_seed(seed, i));
        if (t.name == "unembedding") {
            continue;  // stays zero
        } else if (t.group == ParamGroup::embedding || t.group == ParamGroup::matrix) {
            double scale = 1.0 / std::sqrt(double(t.cols));
            for (std::size_t e = 0; e < t.size(); ++e) dst[e] = scale * rng.gaussian();
        } else if (t.name.find("ve_gate") != std::string::npos) {
            for (std::size_t e = 0; e < t.size(); ++e) dst[e] = -2.0;
        } else {
            for (std::size_t e = 0; e < t.size(); ++e) dst[e] = 1.0;
        }
    }
    return p;
}

Activation gate_activation(Activation kind) {
    if (kind == Activation::swiglu) return Activation::silu;
    if (kind == Activation::geglu) return Activation::gelu;
    return kind;
}

double apply_activation(Activation kind, double x) {
    switch (gate_activation(kind)) {
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::gelu: return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
        case Activation::silu: return x * sigmoid(x);
        case Activation::relu_squared: {
            double r = x > 0.0 ? x : 0.0;
            return r * r;
        }
        default: break;
    }
    return x;
}

double activation_grad(Activation kind, double x) {
    switch (gate_activation(kind)) {
        case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::gelu: {
            double phi = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * phi;
        }
        case Activation::silu: {
            double s = sigmoid(x);
            return s * (1.0 + x * (1.0 - s));
        }
        case Activation::relu_squared: return x > 0.0 ? 2.0 * x : 0.0;
        default: break;
    }
    return 1.0;
}

void rmsnorm(const double* x, const double* gain, int n, double eps, double* out) {
    double inv = 1.0 / std::sqrt(kernels::sum_sq(x, std::size_t(n)) / n + eps);
    for (int i = 0; i < n; ++i) out[i] = gain[i] * x[i] * inv;
}

void rope_rotate(double* vec, int head_dim, int position, double base) {
    for (int i = 0; i * 2 < head_dim; ++i) {
        double theta = position * std::pow(base, -2.0 * i / head_dim);
        double c = std::cos(theta), s = std::sin(theta);
        double x0 = vec[2 * i], x1 = vec[2 * i + 1];
        vec[2 * i] = x0 * c - x1 * s;
        vec[2 * i + 1] = x0 * s + x1 * c;
    }
}

double ForwardResult::bpb() const { return bytes > 0.0 ? ce_nats_sum / (kLn2 * bytes) : 0.0; }

double ce_nats_sum(const Matrix& logits, const Batch& batch) {
    const int T = batch.seq_len, V = logits.cols;
    double total = 0.0;
    for (int b = 0; b < batch.batch_size; ++b) {
        for (int t = 0; t + 1 < T; ++t) {
            std::size_t n = std::size_t(b) * T + t;
            if (!batch.target_mask[n]) continue;
            const double* row = logits.row(int(n));
            int target = batch.token_ids[n + 1];
            double m = row[0];
            for (int j = 1; j < V; ++j) m = std::max(m, row[j]);
            double z = 0.0;
            for (int j = 0; j < V; ++j) z += std::exp(row[j] - m);
            total += m + std::log(z) - row[target];
        }
    }
    return total;
}

double loss_bpb(const Matrix& logits, const Batch& batch) {
    double bytes = 0.0;
    for (double b : batch.byte_lengths) bytes += b;
    if (bytes <= 0.0) return 0.0;
    return ce_nats_sum(logits, batch) / (kLn2 * bytes);
}

namespace {

struct Dims {
    int B, T, N, D, H, KV, hd, Dq, KVD, F, Fout, V, G;
};

struct LayerCache {
    Matrix x_in, normed_attn, q, k, v, attn_heads, attn_proj, x_mid, normed_mlp, h_in, h_act,
        mlp_proj;
    std::vector<double> inv_attn, inv_mlp;
    std::vector<Matrix> probs;  // B·H entries, each T×T (only the visible band is filled)
};

void rmsnorm_rows(const Matrix& x, const double* gain, double eps, Matrix& out,
                  std::vector<double>& inv_rms) {
    int n = x.cols;
    inv_rms.resize(std::size_t(x.rows));
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        double inv = 1.0 / std::sqrt(kernels::sum_sq(xr, std::size_t(n)) / n + eps);
        inv_rms[std::size_t(r)] = inv;
        double* o = out.row(r);
        for (int i = 0; i < n; ++i) o[i] = gain[i] * xr[i] * inv;
    }
}

// Adds the input-gradient of y = gain ⊙ x ⊙ inv into dx; accumulates dgain.
void rmsnorm_rows_backward(const Matrix& x, const double* gain, const std::vector<double>& inv_rms,
                           const Matrix& dy, Matrix& dx, double* dgain) {
    int n = x.cols;
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        const double* dyr = dy.row(r);
        double* dxr = dx.row(r);
        double inv = inv_rms[std::size_t(r)];
        double dot_gx = 0.0;
        for (int i = 0; i < n; ++i) dot_gx += dyr[i] * gain[i] * xr[i];
        double coef = dot_gx * inv * inv * inv / n;
        for (int i = 0; i < n; ++i) {
            dxr[i] += gain[i] * dyr[i] * inv - xr[i] * coef;
            if (dgain) dgain[i] += dyr[i] * xr[i] * inv;
        }
    }
}

class Runner {
  public:
    Runner(const ModelParams& p, const Batch& batch) : p_(p), batch_(batch) {
        d_.B = batch.batch_size;
        d_.T = batch.seq_len;
        d_.N = d_.B * d_.T;
        d_.D = p.arch.width;
        d_.H = p.arch.heads;
        d_.KV = p.arch.kv_heads;
        d_.hd = p.arch.head_dim();
        d_.Dq = d_.H * d_.hd;
        d_.KVD = d_.KV * d_.hd;
        d_.F = ffn_hidden_dim(p.arch);
        d_.Fout = activation_is_gated(p.arch.activation) ? 2 * d_.F : d_.F;
        d_.V = p.vocab_size;
        d_.G = d_.H / d_.KV;
        // rope tables, shared by all layers
        cos_tab_.assign(std::size_t(d_.T) * (d_.hd / 2), 0.0);
        sin_tab_.assign(std::size_t(d_.T) * (d_.hd / 2), 0.0);
        for (int t = 0; t < d_.T; ++t)
            for (int i = 0; i * 2 < d_.hd; ++i) {
                double theta = t * std::pow(kRopeBase, -2.0 * i / d_.hd);
                cos_tab_[std::size_t(t) * (d_.hd / 2) + i] = std::cos(theta);
                sin_tab_[std::size_t(t) * (d_.hd / 2) + i] = std::sin(theta);
            }
    }

    ForwardResult run(std::vector<double>* grads, Matrix* logits_out) {
        forward();
        ForwardResult res = loss();
        if (grads) backward(*grads, res);
        if (logits_out) *logits_out = std::move(logits_);
        return res;
    }

  private:
    const double* unembedding() const {
        return p_.arch.weight_tying ? p_.tensor("token_embedding") : p_.tensor("unembedding");
    }

    void rope_all(Matrix& m, int n_heads) {
        const int half = d_.hd / 2;
        for (int r = 0; r < d_.N; ++r) {
            int t = r % d_.T;
            const double* ct = cos_tab_.data() + std::size_t(t) * half;
            const double* st = sin_tab_.data() + std::size_t(t) * half;
            double* row = m.row(r);
            for (int h = 0; h < n_heads; ++h) {
                double* v = row + h * d_.hd;
                for (int i = 0; i < half; ++i) {
                    double c = ct[i], s = st[i];
                    double x0 = v[2 * i], x1 = v[2 * i + 1];
                    v[2 * i] = x0 * c - x1 * s;
                    v[2 * i + 1] = x0 * s + x1 * c;
                }
            }
        }
    }

    void rope_all_backward(Matrix& m, int n_heads) {
        const int half = d_.hd / 2;
        for (int r = 0; r < d_.N; ++r) {
            int t = r % d_.T;
            const double* ct = cos_tab_.data() + std::size_t(t) * half;
            const double* st = sin_tab_.data() + std::size_t(t) * half;
            double* row = m.row(r);
            for (int h = 0; h < n_heads; ++h) {
                double* v = row + h * d_.hd;
                for (int i = 0; i < half; ++i) {
                    double c = ct[i], s = st[i];
                    double x0 = v[2 * i], x1 = v[2 * i + 1];
                    v[2 * i] = x0 * c + x1 * s;
                    v[2 * i + 1] = -x0 * s + x1 * c;
                }
            }
        }
    }

    void forward() {
        const auto& arch = p_.arch;
        x_ = Matrix(d_.N, d_.D);
        const double* emb = p_.tensor("token_embedding");
        for (int n = 0; n < d_.N; ++n)
            std::memcpy(x_.row(n), emb + std::size_t(batch_.token_ids[std::size_t(n)]) * d_.D,
                        sizeof(double) * std::size_t(d_.D));

        layers_.resize(std::size_t(arch.depth));
        const double inv_sqrt_hd = 1.0 / std::sqrt(double(d_.hd));
        // Per-head scratch slabs reused across layers so attention runs as a
        // handful of GEMMs instead of per-position vector ops.
        Matrix qh(d_.T, d_.hd), kh(d_.T, d_.hd), vh(d_.T, d_.hd);
        Matrix scores(d_.T, d_.T), oh(d_.T, d_.hd);
        for (int l = 0; l < arch.depth; ++l) {
            LayerCache& c = layers_[std::size_t(l)];
            c.x_in = x_;
            c.normed_attn = Matrix(d_.N, d_.D);
            rmsnorm_rows(c.x_in, p_.tensor(layer_tensor(l, "gain_attn")), kRmsEps, c.normed_attn,
                         c.inv_attn);

            c.q = Matrix(d_.N, d_.Dq);
            c.k = Matrix(d_.N, d_.KVD);
            c.v = Matrix(d_.N, d_.KVD);
            kernels::matmul_nt(c.q.data.data(), c.normed_attn.data.data(),
                               p_.tensor(layer_tensor(l, "attn_q")), d_.N, d_.D, d_.Dq);
            kernels::matmul_nt(c.k.data.data(), c.normed_attn.data.data(),
                               p_.tensor(layer_tensor(l, "attn_k")), d_.N, d_.D, d_.KVD);
            kernels::matmul_nt(c.v.data.data(), c.normed_attn.data.data(),
                               p_.tensor(layer_tensor(l, "attn_v")), d_.N, d_.D, d_.KVD);

            if (layer_has_value_embedding(arch, l)) {
                const double* ve = p_.tensor("value_embedding");
                const double* gate = p_.tensor(layer_tensor(l, "ve_gate"));
                for (int n = 0; n < d_.N; ++n) {
                    const double* row = ve + std::size_t(batch_.token_ids[std::size_t(n)]) * d_.KVD;
                    double* vrow = c.v.row(n);
                    for (int i = 0; i < d_.KVD; ++i) vrow[i] += sigmoid(gate[i]) * row[i];
                }
            }

            rope_all(c.q, d_.H);
            rope_all(c.k, d_.KV);

            const int w = layer_window(arch, l, d_.T);
            c.attn_heads = Matrix(d_.N, d_.Dq);
            c.probs.assign(std::size_t(d_.B) * d_.H, Matrix());
            const std::size_t hd_bytes = sizeof(double) * std::size_t(d_.hd);
            for (int b = 0; b < d_.B; ++b) {
                for (int h = 0; h < d_.H; ++h) {
                    int g = h / d_.G;
                    for (int t = 0; t < d_.T; ++t) {
                        std::memcpy(qh.row(t), c.q.row(b * d_.T + t) + h * d_.hd, hd_bytes);
                        std::memcpy(kh.row(t), c.k.row(b * d_.T + t) + g * d_.hd, hd_bytes);
                        std::memcpy(vh.row(t), c.v.row(b * d_.T + t) + g * d_.hd, hd_bytes);
                    }
                    kernels::matmul_nt(scores.data.data(), qh.data.data(), kh.data.data(), d_.T,
                                       d_.hd, d_.T);
                    Matrix& P = c.probs[std::size_t(b) * d_.H + h];
                    P = Matrix(d_.T, d_.T);  // stays zero outside the causal window band
                    for (int t = 0; t < d_.T; ++t) {
                        int s0 = std::max(0, t - w + 1);
                        const double* srow = scores.row(t);
                        double* prow = P.row(t);
                        double m = -1e300;
                        for (int s = s0; s <= t; ++s) {
                            double sc = srow[s] * inv_sqrt_hd;
                            prow[s] = sc;
                            m = std::max(m, sc);
                        }
                        double z = 0.0;
                        for (int s = s0; s <= t; ++s) {
                            prow[s] = std::exp(prow[s] - m);
                            z += prow[s];
                        }
                        double invz = 1.0 / z;
                        for (int s = s0; s <= t; ++s) prow[s] *= invz;
                    }
                    kernels::matmul_nn(oh.data.data(), P.data.data(), vh.data.data(), d_.T, d_.T,
                                       d_.hd);
                    for (int t = 0; t < d_.T; ++t)
                        std::memcpy(c.attn_heads.row(b * d_.T + t) + h * d_.hd, oh.row(t),
                                    hd_bytes);
                }
            }

            c.attn_proj = Matrix(d_.N, d_.D);
            kernels::matmul_nt(c.attn_proj.data.data(), c.attn_heads.data.data(),
                               p_.tensor(layer_tensor(l, "attn_o")), d_.N, d_.Dq, d_.D);

            double s_attn = resid_scale(l, "resid_attn");
            c.x_mid = c.x_in;
            kernels::axpy(s_attn, c.attn_proj.data.data(), c.x_mid.data.data(), c.x_mid.size());

            c.normed_mlp = Matrix(d_.N, d_.D);
            rmsnorm_rows(c.x_mid, p_.tensor(layer_tensor(l, "gain_mlp")), kRmsEps, c.normed_mlp,
                         c.inv_mlp);

            c.h_in = Matrix(d_.N, d_.Fout);
            kernels::matmul_nt(c.h_in.data.data(), c.normed_mlp.data.data(),
                               p_.tensor(layer_tensor(l, "mlp_in")), d_.N, d_.D, d_.Fout);

            c.h_act = Matrix(d_.N, d_.F);
            if (activation_is_gated(arch.activation)) {
                Activation ga = gate_activation(arch.activation);
                for (int n = 0; n < d_.N; ++n) {
                    const double* hin = c.h_in.row(n);
                    double* hact = c.h_act.row(n);
                    for (int j = 0; j < d_.F; ++j)
                        hact[j] = hin[j] * apply_activation(ga, hin[d_.F + j]);
                }
            } else {
                for (int n = 0; n < d_.N; ++n) {
                    const double* hin = c.h_in.row(n);
                    double* hact = c.h_act.row(n);
                    for (int j = 0; j < d_.F; ++j) hact[j] = apply_activation(arch.activation, hin[j]);
                }
            }

            c.mlp_proj = Matrix(d_.N, d_.D);
            kernels::matmul_nt(c.mlp_proj.data.data(), c.h_act.data.data(),
                               p_.tensor(layer_tensor(l, "mlp_out")), d_.N, d_.F, d_.D);

            double s_mlp = resid_scale(l, "resid_mlp");
            x_ = c.x_mid;
            kernels::axpy(s_mlp, c.mlp_proj.data.data(), x_.data.data(), x_.size());
        }

        normed_final_ = Matrix(d_.N, d_.D);
        rmsnorm_rows(x_, p_.tensor("final_gain"), kRmsEps, normed_final_, inv_final_);
        logits_ = Matrix(d_.N, d_.V);
        kernels::matmul_nt(logits_.data.data(), normed_final_.data.data(), unembedding(), d_.N, d_.D,
                           d_.V);
    }

    ForwardResult loss() const {
        ForwardResult r;
        r.ce_nats_sum = ce_nats_sum(logits_, batch_);
        for (int n = 0; n < d_.N; ++n) r.scored_targets += batch_.target_mask[std::size_t(n)];
        for (double b : batch_.byte_lengths) r.bytes += b;
        return r;
    }

    double resid_scale(int l, const char* which) const {
        if (p_.arch.residual_scaling == ResidualScaling::fixed) return 1.0;
        return *p_.tensor(layer_tensor(l, which));
    }

    void backward(std::vector<double>& grads, const ForwardResult& res) {
        grads.assign(p_.data.size(), 0.0);
        auto gptr = [&](const std::string& name) { return grads.data() + p_.layout.at(name).offset; };

        // d mean-CE / d logits, masked rows only
        Matrix dlogits(d_.N, d_.V);
        const double inv_scored = res.scored_targets ? 1.0 / res.scored_targets : 0.0;
        for (int b = 0; b < d_.B; ++b) {
            for (int t = 0; t + 1 < d_.T; ++t) {
                std::size_t n = std::size_t(b) * d_.T + t;
                if (!batch_.target_mask[n]) continue;
                const double* row = logits_.row(int(n));
                double* drow = dlogits.row(int(n));
                double m = row[0];
                for (int j = 1; j < d_.V; ++j) m = std::max(m, row[j]);
                double z = 0.0;
                for (int j = 0; j < d_.V; ++j) {
                    drow[j] = std::exp(row[j] - m);
                    z += drow[j];
                }
                double invz = inv_scored / z;
                for (int j = 0; j < d_.V; ++j) drow[j] *= invz;
                drow[batch_.token_ids[n + 1]] -= inv_scored;
            }
        }

        double* d_unemb =
            p_.arch.weight_tying ? gptr("token_embedding") : gptr("unembedding");
        kernels::matmul_tn(d_unemb, dlogits.data.data(), normed_final_.data.data(), d_.V, d_.N, d_.D,
                           true);
        Matrix dx(d_.N, d_.D);
        {
            Matrix dnormed(d_.N, d_.D);
            kernels::matmul_nn(dnormed.data.data(), dlogits.data.data(), unembedding(), d_.N, d_.V,
                               d_.D);
            rmsnorm_rows_backward(x_, p_.tensor("final_gain"), inv_final_, dnormed, dx,
                                  gptr("final_gain"));
        }

        const double inv_sqrt_hd = 1.0 / std::sqrt(double(d_.hd));
        const bool learned_res = p_.arch.residual_scaling == ResidualScaling::learned_per_layer;
        // Per-head scratch slabs reused across layers (see forward()).
        Matrix qh(d_.T, d_.hd), kh(d_.T, d_.hd), vh(d_.T, d_.hd), doh(d_.T, d_.hd);
        Matrix dscores(d_.T, d_.T), dqh(d_.T, d_.hd), dkh(d_.T, d_.hd), dvh(d_.T, d_.hd);

        for (int l = p_.arch.depth - 1; l >= 0; --l) {
            LayerCache& c = layers_[std::size_t(l)];

            // ---- MLP branch: x_out = x_mid + s_m · mlp_proj
            double s_mlp = resid_scale(l, "resid_mlp");
            if (learned_res)
                *gptr(layer_tensor(l, "resid_mlp")) +=
                    kernels::dot(dx.data.data(), c.mlp_proj.data.data(), dx.size());
            Matrix dproj = dx;
            if (s_mlp != 1.0) kernels::scale(s_mlp, dproj.data.data(), dproj.size());

            Matrix dh_act(d_.N, d_.F);
            kernels::matmul_nn(dh_act.data.data(), dproj.data.data(),
                               p_.tensor(layer_tensor(l, "mlp_out")), d_.N, d_.D, d_.F);
            kernels::matmul_tn(gptr(layer_tensor(l, "mlp_out")), dproj.data.data(),
                               c.h_act.data.data(), d_.D, d_.N, d_.F, true);

            Matrix dh_in(d_.N, d_.Fout);
            if (activation_is_gated(p_.arch.activation)) {
                Activation ga = gate_activation(p_.arch.activation);
                for (int n = 0; n < d_.N; ++n) {
                    const double* hin = c.h_in.row(n);
                    const double* da = dh_act.row(n);
                    double* di = dh_in.row(n);
                    for (int j = 0; j < d_.F; ++j) {
                        double gate_pre = hin[d_.F + j];
                        di[j] = da[j] * apply_activation(ga, gate_pre);
                        di[d_.F + j] = da[j] * hin[j] * activation_grad(ga, gate_pre);
                    }
                }
            } else {
                for (int n = 0; n < d_.N; ++n) {
                    const double* hin = c.h_in.row(n);
                    const double* da = dh_act.row(n);
                    double* di = dh_in.row(n);
                    for (int j = 0; j < d_.F; ++j)
                        di[j] = da[j] * activation_grad(p_.arch.activation, hin[j]);
                }
            }

            Matrix dnormed_mlp(d_.N, d_.D);
            kernels::matmul_nn(dnormed_mlp.data.data(), dh_in.data.data(),
                               p_.tensor(layer_tensor(l, "mlp_in")), d_.N, d_.Fout, d_.D);
            kernels::matmul_tn(gptr(layer_tensor(l, "mlp_in")), dh_in.data.data(),
                               c.normed_mlp.data.data(), d_.Fout, d_.N, d_.D, true);

            // dx currently holds d x_mid from the residual path; the norm
            // input-grad adds to it.
            rmsnorm_rows_backward(c.x_mid, p_.tensor(layer_tensor(l, "gain_mlp")), c.inv_mlp,
                                  dnormed_mlp, dx, gptr(layer_tensor(l, "gain_mlp")));

            // ---- attention branch: x_mid = x_in + s_a · attn_proj
            double s_attn = resid_scale(l, "resid_attn");
            if (learned_res)
                *gptr(layer_tensor(l, "resid_attn")) +=
                    kernels::dot(dx.data.data(), c.attn_proj.data.data(), dx.size());
            Matrix dattn_proj = dx;
            if (s_attn != 1.0) kernels::scale(s_attn, dattn_proj.data.data(), dattn_proj.size());

            Matrix dheads(d_.N, d_.Dq);
            kernels::matmul_nn(dheads.data.data(), dattn_proj.data.data(),
                               p_.tensor(layer_tensor(l, "attn_o")), d_.N, d_.D, d_.Dq);
            kernels::matmul_tn(gptr(layer_tensor(l, "attn_o")), dattn_proj.data.data(),
                               c.attn_heads.data.data(), d_.D, d_.N, d_.Dq, true);

            Matrix dq(d_.N, d_.Dq), dk(d_.N, d_.KVD), dv(d_.N, d_.KVD);
            const int w = layer_window(p_.arch, l, d_.T);
            const std::size_t hd_bytes = sizeof(double) * std::size_t(d_.hd);
            for (int b = 0; b < d_.B; ++b) {
                for (int h = 0; h < d_.H; ++h) {
                    const Matrix& P = c.probs[std::size_t(b) * d_.H + h];
                    int g = h / d_.G;
                    for (int t = 0; t < d_.T; ++t) {
                        std::memcpy(qh.row(t), c.q.row(b * d_.T + t) + h * d_.hd, hd_bytes);
                        std::memcpy(kh.row(t), c.k.row(b * d_.T + t) + g * d_.hd, hd_bytes);
                        std::memcpy(vh.row(t), c.v.row(b * d_.T + t) + g * d_.hd, hd_bytes);
                        std::memcpy(doh.row(t), dheads.row(b * d_.T + t) + h * d_.hd, hd_bytes);
                    }
                    // dP = dOut·Vᵀ; dV = Pᵀ·dOut (P is zero outside the band,
                    // so the full-matrix products are exact).
                    kernels::matmul_nt(dscores.data.data(), doh.data.data(), vh.data.data(), d_.T,
                                       d_.hd, d_.T);
                    kernels::matmul_tn(dvh.data.data(), P.data.data(), doh.data.data(), d_.T, d_.T,
                                       d_.hd);
                    for (int t = 0; t < d_.T; ++t) {
                        int s0 = std::max(0, t - w + 1);
                        const double* prow = P.row(t);
                        double* dsrow = dscores.row(t);
                        double dsum = 0.0;
                        for (int s = s0; s <= t; ++s) dsum += prow[s] * dsrow[s];
                        for (int s = 0; s < s0; ++s) dsrow[s] = 0.0;
                        for (int s = s0; s <= t; ++s)
                            dsrow[s] = prow[s] * (dsrow[s] - dsum) * inv_sqrt_hd;
                        for (int s = t + 1; s < d_.T; ++s) dsrow[s] = 0.0;
                    }
                    kernels::matmul_nn(dqh.data.data(), dscores.data.data(), kh.data.data(), d_.T,
                                       d_.T, d_.hd);
                    kernels::matmul_tn(dkh.data.data(), dscores.data.data(), qh.data.data(), d_.T,
                                       d_.T, d_.hd);
                    for (int t = 0; t < d_.T; ++t) {
                        std::memcpy(dq.row(b * d_.T + t) + h * d_.hd, dqh.row(t), hd_bytes);
                        kernels::axpy(1.0, dkh.row(t), dk.row(b * d_.T + t) + g * d_.hd,
                                      std::size_t(d_.hd));
                        kernels::axpy(1.0, dvh.row(t), dv.row(b * d_.T + t) + g * d_.hd,
                                      std::size_t(d_.hd));
                    }
                }
            }

            rope_all_backward(dq, d_.H);
            rope_all_backward(dk, d_.KV);

            if (layer_has_value_embedding(p_.arch, l)) {
                const double* ve = p_.tensor("value_embedding");
                const double* gate = p_.tensor(layer_tensor(l, "ve_gate"));
                double* d_ve = gptr("value_embedding");
                double* d_gate = gptr(layer_tensor(l, "ve_gate"));
                for (int n = 0; n < d_.N; ++n) {
                    std::size_t tok = std::size_t(batch_.token_ids[std::size_t(n)]);
                    const double* verow = ve + tok * d_.KVD;
                    double* dverow = d_ve + tok * d_.KVD;
                    const double* dvrow = dv.row(n);
                    for (int i = 0; i < d_.KVD; ++i) {
                        double s = sigmoid(gate[i]);
                        dverow[i] += s * dvrow[i];
                        d_gate[i] += s * (1.0 - s) * verow[i] * dvrow[i];
                    }
                }
            }

            Matrix dnormed_attn(d_.N, d_.D);
            kernels::matmul_nn(dnormed_attn.data.data(), dq.data.data(),
                               p_.tensor(layer_tensor(l, "attn_q")), d_.N, d_.Dq, d_.D);
            kernels::matmul_tn(gptr(layer_tensor(l, "attn_q")), dq.data.data(),
                               c.normed_attn.data.data(), d_.Dq, d_.N, d_.D, true);
            kernels::matmul_nn(dnormed_attn.data.data(), dk.data.data(),
                               p_.tensor(layer_tensor(l, "attn_k")), d_.N, d_.KVD, d_.D, true);
            kernels::matmul_tn(gptr(layer_tensor(l, "attn_k")), dk.data.data(),
                               c.normed_attn.data.data(), d_.KVD, d_.N, d_.D, true);
            kernels::matmul_nn(dnormed_attn.data.data(), dv.data.data(),
                               p_.tensor(layer_tensor(l, "attn_v")), d_.N, d_.KVD, d_.D, true);
            kernels::matmul_tn(gptr(layer_tensor(l, "attn_v")), dv.data.data(),
                               c.normed_attn.data.data(), d_.KVD, d_.N, d_.D, true);

            rmsnorm_rows_backward(c.x_in, p_.tensor(layer_tensor(l, "gain_attn")), c.inv_attn,
                                  dnormed_attn, dx, gptr(layer_tensor(l, "gain_attn")));
        }

        double* d_emb = gptr("token_embedding");
        for (int n = 0; n < d_.N; ++n)
            kernels::axpy(1.0, dx.row(n),
                          d_emb + std::size_t(batch_.token_ids[std::size_t(n)]) * d_.D,
                          std::size_t(d_.D));
    }

    const ModelParams& p_;
    const Batch& batch_;
    Dims d_{};
    std::vector<double> cos_tab_, sin_tab_;
    std::vector<LayerCache> layers_;
    Matrix x_, normed_final_, logits_;
    std::vector<double> inv_final_;
};

}  // namespace

Matrix forward_logits(const ModelParams& p, const Batch& batch) {
    Runner r(p, batch);
    Matrix logits;
    r.run(nullptr, &logits);
    return logits;
}

ForwardResult forward_loss(const ModelParams& p, const Batch& batch) {
    Runner r(p, batch);
    return r.run(nullptr, nullptr);
}

ForwardResult forward_backward(const ModelParams& p, const Batch& batch, std::vector<double>& grads) {
    Runner r(p, batch);
    return r.run(&grads, nullptr);
}

}  // namespace searchlab
