#include "muq/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "muq/io.hpp"

namespace muq::nn {

std::size_t shape_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

Tensor::Tensor(std::vector<int> shape_) : shape(std::move(shape_)) {
    data.assign(shape_size(shape), 0.0);
}

Tensor Tensor::vec(std::vector<double> values) {
    Tensor t;
    t.shape = {static_cast<int>(values.size())};
    t.data = std::move(values);
    return t;
}

LayerSpec LayerSpec::dense(int units) { return {LayerKind::Dense, units, 0, 0, 1, 0, 0.0}; }
LayerSpec LayerSpec::conv3d(int filters, int kernel, int stride) {
    return {LayerKind::Conv3D, 0, filters, kernel, stride, 0, 0.0};
}
LayerSpec LayerSpec::relu() { return {LayerKind::ReLU, 0, 0, 0, 1, 0, 0.0}; }
LayerSpec LayerSpec::max_pool3d(int window) { return {LayerKind::MaxPool3D, 0, 0, 0, 1, window, 0.0}; }
LayerSpec LayerSpec::flatten() { return {LayerKind::Flatten, 0, 0, 0, 1, 0, 0.0}; }
LayerSpec LayerSpec::dropout(double rate) { return {LayerKind::Dropout, 0, 0, 0, 1, 0, rate}; }
LayerSpec LayerSpec::standardize() { return {LayerKind::Standardize, 0, 0, 0, 1, 0, 0.0}; }

namespace {

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

class DenseLayer final : public Layer {
  public:
    DenseLayer(int in, int out, Rng& rng) : in_(in), out_(out) {
        if (in < 1 || out < 1) throw ShapeMismatchError("dense layer needs positive dimensions");
        w_.resize(static_cast<std::size_t>(in) * static_cast<std::size_t>(out));
        b_.assign(static_cast<std::size_t>(out), 0.0);
        gw_.assign(w_.size(), 0.0);
        gb_.assign(b_.size(), 0.0);
        const double lim = glorot_limit(static_cast<std::size_t>(in), static_cast<std::size_t>(out));
        for (double& w : w_) w = rng.uniform(-lim, lim);
    }

    Tensor forward(const Tensor& in, bool, Rng&) override {
        if (in.shape.size() != 1 || in.shape[0] != in_)
            throw ShapeMismatchError("dense layer input size mismatch");
        input_ = in;
        Tensor out({out_});
        for (int o = 0; o < out_; ++o) {
            const double* row = w_.data() + static_cast<std::size_t>(o) * in_;
            double s = b_[static_cast<std::size_t>(o)];
            for (int i = 0; i < in_; ++i) s += row[i] * in.data[static_cast<std::size_t>(i)];
            out.data[static_cast<std::size_t>(o)] = s;
        }
        return out;
    }

    Tensor backward(const Tensor& g) override {
        Tensor gx({in_});
        for (int o = 0; o < out_; ++o) {
            const double go = g.data[static_cast<std::size_t>(o)];
            const double* row = w_.data() + static_cast<std::size_t>(o) * in_;
            double* grow = gw_.data() + static_cast<std::size_t>(o) * in_;
            gb_[static_cast<std::size_t>(o)] += go;
            for (int i = 0; i < in_; ++i) {
                grow[i] += go * input_.data[static_cast<std::size_t>(i)];
                gx.data[static_cast<std::size_t>(i)] += go * row[i];
            }
        }
        return gx;
    }

    LayerSpec spec() const override { return LayerSpec::dense(out_); }
    std::vector<double>* weights() override { return &w_; }
    std::vector<double>* biases() override { return &b_; }
    std::vector<double>* weight_grads() override { return &gw_; }
    std::vector<double>* bias_grads() override { return &gb_; }

  private:
    int in_, out_;
    std::vector<double> w_, b_, gw_, gb_;
    Tensor input_;
};

class Conv3DLayer final : public Layer {
  public:
    Conv3DLayer(int cin, int cout, int kernel, int stride, Rng& rng)
        : cin_(cin), cout_(cout), k_(kernel), s_(stride) {
        if (cin < 1 || cout < 1 || kernel < 1 || stride < 1)
            throw ShapeMismatchError("conv3d layer needs positive dimensions");
        const std::size_t kv = static_cast<std::size_t>(k_) * k_ * k_;
        w_.resize(static_cast<std::size_t>(cout_) * cin_ * kv);
        b_.assign(static_cast<std::size_t>(cout_), 0.0);
        gw_.assign(w_.size(), 0.0);
        gb_.assign(b_.size(), 0.0);
        const double lim =
            glorot_limit(static_cast<std::size_t>(cin_) * kv, static_cast<std::size_t>(cout_) * kv);
        for (double& w : w_) w = rng.uniform(-lim, lim);
    }

    Tensor forward(const Tensor& in, bool, Rng&) override {
        if (in.shape.size() != 4 || in.shape[0] != cin_)
            throw ShapeMismatchError("conv3d input must be {channels, d, h, w}");
        d_ = in.shape[1];
        h_ = in.shape[2];
        wd_ = in.shape[3];
        if (d_ < k_ || h_ < k_ || wd_ < k_) throw ShapeMismatchError("conv3d input smaller than kernel");
        od_ = (d_ - k_) / s_ + 1;
        oh_ = (h_ - k_) / s_ + 1;
        ow_ = (wd_ - k_) / s_ + 1;
        input_ = in;
        Tensor out({cout_, od_, oh_, ow_});
        for (int f = 0; f < cout_; ++f)
            for (int z = 0; z < od_; ++z)
                for (int y = 0; y < oh_; ++y)
                    for (int x = 0; x < ow_; ++x) {
                        double acc = b_[static_cast<std::size_t>(f)];
                        for (int m = 0; m < cin_; ++m)
                            for (int p = 0; p < k_; ++p)
                                for (int q = 0; q < k_; ++q) {
                                    const double* wrow = w_.data() + widx(f, m, p, q);
                                    const double* irow =
                                        in.data.data() + iidx(m, z * s_ + p, y * s_ + q, x * s_);
                                    for (int r = 0; r < k_; ++r) acc += wrow[r] * irow[r];
                                }
                        out.data[oidx(f, z, y, x)] = acc;
                    }
        return out;
    }

    Tensor backward(const Tensor& g) override {
        Tensor gx(input_.shape);
        for (int f = 0; f < cout_; ++f)
            for (int z = 0; z < od_; ++z)
                for (int y = 0; y < oh_; ++y)
                    for (int x = 0; x < ow_; ++x) {
                        const double go = g.data[oidx(f, z, y, x)];
                        gb_[static_cast<std::size_t>(f)] += go;
                        for (int m = 0; m < cin_; ++m)
                            for (int p = 0; p < k_; ++p)
                                for (int q = 0; q < k_; ++q) {
                                    const std::size_t wbase = widx(f, m, p, q);
                                    const std::size_t ibase = iidx(m, z * s_ + p, y * s_ + q, x * s_);
                                    for (int r = 0; r < k_; ++r) {
                                        gw_[wbase + static_cast<std::size_t>(r)] +=
                                            go * input_.data[ibase + static_cast<std::size_t>(r)];
                                        gx.data[ibase + static_cast<std::size_t>(r)] +=
                                            go * w_[wbase + static_cast<std::size_t>(r)];
                                    }
                                }
                    }
        return gx;
    }

    LayerSpec spec() const override { return LayerSpec::conv3d(cout_, k_, s_); }
    std::vector<double>* weights() override { return &w_; }
    std::vector<double>* biases() override { return &b_; }
    std::vector<double>* weight_grads() override { return &gw_; }
    std::vector<double>* bias_grads() override { return &gb_; }

  private:
    std::size_t widx(int f, int m, int p, int q) const {
        return (((static_cast<std::size_t>(f) * cin_ + m) * k_ + p) * k_ + q) * k_;
    }
    std::size_t iidx(int c, int z, int y, int x) const {
        return ((static_cast<std::size_t>(c) * d_ + z) * h_ + y) * static_cast<std::size_t>(wd_) + x;
    }
    std::size_t oidx(int f, int z, int y, int x) const {
        return ((static_cast<std::size_t>(f) * od_ + z) * oh_ + y) * static_cast<std::size_t>(ow_) + x;
    }

    int cin_, cout_, k_, s_;
    int d_ = 0, h_ = 0, wd_ = 0, od_ = 0, oh_ = 0, ow_ = 0;
    std::vector<double> w_, b_, gw_, gb_;
    Tensor input_;
};

class ReLULayer final : public Layer {
  public:
    Tensor forward(const Tensor& in, bool, Rng&) override {
        mask_.assign(in.size(), 0);
        Tensor out = in;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out.data[i] > 0.0)
                mask_[i] = 1;
            else
                out.data[i] = 0.0;
        }
        return out;
    }

    Tensor backward(const Tensor& g) override {
        Tensor gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i)
            if (!mask_[i]) gx.data[i] = 0.0;
        return gx;
    }

    LayerSpec spec() const override { return LayerSpec::relu(); }

  private:
    std::vector<std::uint8_t> mask_;
};

class MaxPool3DLayer final : public Layer {
  public:
    explicit MaxPool3DLayer(int window) : w_(window) {
        if (window < 1) throw ShapeMismatchError("pool window must be >= 1");
    }

    Tensor forward(const Tensor& in, bool, Rng&) override {
        if (in.shape.size() != 4) throw ShapeMismatchError("max pool input must be {channels, d, h, w}");
        const int c = in.shape[0], d = in.shape[1], h = in.shape[2], wd = in.shape[3];
        const int od = d / w_, oh = h / w_, ow = wd / w_;
        if (od < 1 || oh < 1 || ow < 1) throw ShapeMismatchError("max pool window larger than input");
        in_shape_ = in.shape;
        Tensor out({c, od, oh, ow});
        argmax_.assign(out.size(), 0);
        std::size_t o = 0;
        for (int ch = 0; ch < c; ++ch)
            for (int z = 0; z < od; ++z)
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x, ++o) {
                        double best = -1e300;
                        std::size_t best_idx = 0;
                        for (int p = 0; p < w_; ++p)
                            for (int q = 0; q < w_; ++q)
                                for (int r = 0; r < w_; ++r) {
                                    const std::size_t idx =
                                        ((static_cast<std::size_t>(ch) * d + (z * w_ + p)) * h + (y * w_ + q)) *
                                            static_cast<std::size_t>(wd) +
                                        (x * w_ + r);
                                    if (in.data[idx] > best) {
                                        best = in.data[idx];
                                        best_idx = idx;
                                    }
                                }
                        out.data[o] = best;
                        argmax_[o] = best_idx;
                    }
        return out;
    }

    Tensor backward(const Tensor& g) override {
        Tensor gx(in_shape_);
        for (std::size_t o = 0; o < g.size(); ++o) gx.data[argmax_[o]] += g.data[o];
        return gx;
    }

    LayerSpec spec() const override { return LayerSpec::max_pool3d(w_); }

  private:
    int w_;
    std::vector<int> in_shape_;
    std::vector<std::size_t> argmax_;
};

class FlattenLayer final : public Layer {
  public:
    Tensor forward(const Tensor& in, bool, Rng&) override {
        in_shape_ = in.shape;
        Tensor out;
        out.shape = {static_cast<int>(in.size())};
        out.data = in.data;
        return out;
    }

    Tensor backward(const Tensor& g) override {
        Tensor gx;
        gx.shape = in_shape_;
        gx.data = g.data;
        return gx;
    }

    LayerSpec spec() const override { return LayerSpec::flatten(); }

  private:
    std::vector<int> in_shape_;
};

class DropoutLayer final : public Layer {
  public:
    explicit DropoutLayer(double rate) : rate_(rate) {
        if (!(rate >= 0.0 && rate < 1.0)) throw ShapeMismatchError("dropout rate outside [0, 1)");
    }

    Tensor forward(const Tensor& in, bool train, Rng& rng) override {
        Tensor out = in;
        if (!train || rate_ == 0.0) {
            mask_.assign(in.size(), 1.0);
            return out;
        }
        // Inverted dropout: surviving units are scaled so inference needs no
        // correction.
        const double keep = 1.0 - rate_;
        mask_.resize(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) {
            mask_[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
            out.data[i] *= mask_[i];
        }
        return out;
    }

    Tensor backward(const Tensor& g) override {
        Tensor gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] *= mask_[i];
        return gx;
    }

    LayerSpec spec() const override { return LayerSpec::dropout(rate_); }

  private:
    double rate_;
    std::vector<double> mask_;
};

class StandardizeLayer final : public Layer {
  public:
    explicit StandardizeLayer(const FeatureStats* stats) : stats_(stats) {}

    Tensor forward(const Tensor& in, bool, Rng&) override {
        if (in.size() != stats_->mean.size())
            throw ShapeMismatchError("standardize layer feature count mismatch");
        Tensor out = in;
        for (std::size_t i = 0; i < out.size(); ++i)
            out.data[i] = (out.data[i] - stats_->mean[i]) / stats_->stddev[i];
        return out;
    }

    Tensor backward(const Tensor& g) override {
        Tensor gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] /= stats_->stddev[i];
        return gx;
    }

    LayerSpec spec() const override { return LayerSpec::standardize(); }

  private:
    const FeatureStats* stats_;
};

std::vector<int> infer_shape(const std::vector<int>& in, const LayerSpec& s) {
    switch (s.kind) {
        case LayerKind::Dense:
            return {s.units};
        case LayerKind::Conv3D: {
            if (in.size() != 4) throw ShapeMismatchError("conv3d needs a 4-d input");
            const int od = (in[1] - s.kernel) / s.stride + 1;
            const int oh = (in[2] - s.kernel) / s.stride + 1;
            const int ow = (in[3] - s.kernel) / s.stride + 1;
            if (in[1] < s.kernel || od < 1 || oh < 1 || ow < 1)
                throw ShapeMismatchError("conv3d input smaller than kernel");
            return {s.filters, od, oh, ow};
        }
        case LayerKind::MaxPool3D: {
            if (in.size() != 4) throw ShapeMismatchError("max pool needs a 4-d input");
            const int od = in[1] / s.window, oh = in[2] / s.window, ow = in[3] / s.window;
            if (od < 1 || oh < 1 || ow < 1) throw ShapeMismatchError("pool window larger than input");
            return {in[0], od, oh, ow};
        }
        case LayerKind::Flatten:
            return {static_cast<int>(shape_size(in))};
        case LayerKind::ReLU:
        case LayerKind::Dropout:
        case LayerKind::Standardize:
        case LayerKind::Concat:
            return in;
    }
    throw ShapeMismatchError("unknown layer kind");
}

std::unique_ptr<Layer> make_layer(const LayerSpec& s, const std::vector<int>& in_shape,
                                  const FeatureStats* stats, Rng& rng) {
    switch (s.kind) {
        case LayerKind::Dense: {
            if (in_shape.size() != 1) throw ShapeMismatchError("dense needs a flat input");
            return std::make_unique<DenseLayer>(in_shape[0], s.units, rng);
        }
        case LayerKind::Conv3D:
            if (in_shape.size() != 4) throw ShapeMismatchError("conv3d needs a 4-d input");
            return std::make_unique<Conv3DLayer>(in_shape[0], s.filters, s.kernel, s.stride, rng);
        case LayerKind::ReLU:
            return std::make_unique<ReLULayer>();
        case LayerKind::MaxPool3D:
            return std::make_unique<MaxPool3DLayer>(s.window);
        case LayerKind::Flatten:
            return std::make_unique<FlattenLayer>();
        case LayerKind::Dropout:
            return std::make_unique<DropoutLayer>(s.rate);
        case LayerKind::Standardize:
            return std::make_unique<StandardizeLayer>(stats);
        case LayerKind::Concat:
            break;
    }
    throw ShapeMismatchError("layer kind cannot be instantiated");
}

}  // namespace

Topology make_default_topology(int grid_n, const TopologyConfig& cfg) {
    Topology t;
    int s = grid_n;
    for (int b = 0; b < cfg.max_blocks; ++b) {
        const int after_conv = s - (cfg.kernel - 1);
        const int after_pool = after_conv / cfg.pool;
        if (after_conv < 1 || after_pool < 1) break;
        t.voxel_branch.push_back(LayerSpec::conv3d(cfg.n_F, cfg.kernel));
        t.voxel_branch.push_back(LayerSpec::relu());
        t.voxel_branch.push_back(LayerSpec::max_pool3d(cfg.pool));
        s = after_pool;
    }
    t.voxel_branch.push_back(LayerSpec::flatten());
    t.numeric_branch.push_back(LayerSpec::standardize());
    for (int l = 0; l < cfg.n_L; ++l) {
        t.trunk.push_back(LayerSpec::dense(cfg.n_u));
        t.trunk.push_back(LayerSpec::relu());
        if (cfg.dropout > 0.0) t.trunk.push_back(LayerSpec::dropout(cfg.dropout));
    }
    t.trunk.push_back(LayerSpec::dense(cfg.n_out));
    return t;
}

Network::Network(Topology topology, int grid_n, int numeric_dim, std::uint64_t seed)
    : topology_(std::move(topology)), grid_n_(grid_n), numeric_dim_(numeric_dim) {
    if (grid_n < 1 || numeric_dim < 1) throw ShapeMismatchError("network needs positive input sizes");
    input_stats_ = std::make_shared<FeatureStats>();
    input_stats_->mean.assign(static_cast<std::size_t>(numeric_dim), 0.0);
    input_stats_->stddev.assign(static_cast<std::size_t>(numeric_dim), 1.0);
    meta_.seed = seed;
    build_layers(seed);
}

void Network::build_layers(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> shape = {1, grid_n_, grid_n_, grid_n_};
    for (const LayerSpec& s : topology_.voxel_branch) {
        voxel_layers_.push_back(make_layer(s, shape, input_stats_.get(), rng));
        shape = infer_shape(shape, s);
    }
    if (shape.size() != 1)
        throw ShapeMismatchError("voxel branch must end flat (add a Flatten layer)");
    voxel_out_size_ = static_cast<std::size_t>(shape[0]);

    std::vector<int> nshape = {numeric_dim_};
    for (const LayerSpec& s : topology_.numeric_branch) {
        numeric_layers_.push_back(make_layer(s, nshape, input_stats_.get(), rng));
        nshape = infer_shape(nshape, s);
    }
    if (nshape.size() != 1) throw ShapeMismatchError("numeric branch must stay flat");

    std::vector<int> tshape = {static_cast<int>(voxel_out_size_) + nshape[0]};
    for (const LayerSpec& s : topology_.trunk) {
        trunk_layers_.push_back(make_layer(s, tshape, input_stats_.get(), rng));
        tshape = infer_shape(tshape, s);
    }
    if (tshape.size() != 1) throw ShapeMismatchError("trunk must end flat");
    n_out_ = tshape[0];
    label_stats_.mean.assign(static_cast<std::size_t>(n_out_), 0.0);
    label_stats_.stddev.assign(static_cast<std::size_t>(n_out_), 1.0);
}

Network Network::clone() const {
    Network copy(topology_, grid_n_, numeric_dim_, meta_.seed);
    *copy.input_stats_ = *input_stats_;
    copy.label_stats_ = label_stats_;
    copy.meta_ = meta_;
    copy.set_flat_params(flat_params());
    return copy;
}

Tensor Network::forward(const Tensor& numeric, const Tensor& voxel, bool train, Rng& rng) {
    if (numeric.shape.size() != 1 || numeric.shape[0] != numeric_dim_)
        throw ShapeMismatchError("numeric input size mismatch");
    if (voxel.shape.size() != 4 || voxel.shape[1] != grid_n_ || voxel.shape[2] != grid_n_ ||
        voxel.shape[3] != grid_n_)
        throw ShapeMismatchError("voxel input size mismatch");

    Tensor v = voxel;
    for (auto& l : voxel_layers_) v = l->forward(v, train, rng);
    Tensor u = numeric;
    for (auto& l : numeric_layers_) u = l->forward(u, train, rng);

    Tensor c({static_cast<int>(v.size() + u.size())});
    std::copy(v.data.begin(), v.data.end(), c.data.begin());
    std::copy(u.data.begin(), u.data.end(),
              c.data.begin() + static_cast<std::ptrdiff_t>(v.size()));

    for (auto& l : trunk_layers_) c = l->forward(c, train, rng);
    return c;
}

void Network::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = trunk_layers_.rbegin(); it != trunk_layers_.rend(); ++it) g = (*it)->backward(g);

    Tensor gv({static_cast<int>(voxel_out_size_)});
    std::copy(g.data.begin(), g.data.begin() + static_cast<std::ptrdiff_t>(voxel_out_size_),
              gv.data.begin());
    Tensor gu({static_cast<int>(g.size() - voxel_out_size_)});
    std::copy(g.data.begin() + static_cast<std::ptrdiff_t>(voxel_out_size_), g.data.end(),
              gu.data.begin());

    for (auto it = voxel_layers_.rbegin(); it != voxel_layers_.rend(); ++it) gv = (*it)->backward(gv);
    for (auto it = numeric_layers_.rbegin(); it != numeric_layers_.rend(); ++it)
        gu = (*it)->backward(gu);
}

Tensor Network::voxel_to_tensor(const VoxelGrid& g) const {
    if (g.n != grid_n_) throw ShapeMismatchError("grid size does not match network");
    Tensor t({1, grid_n_, grid_n_, grid_n_});
    for (std::size_t i = 0; i < g.data.size(); ++i) t.data[i] = static_cast<double>(g.data[i]);
    return t;
}

std::vector<double> Network::predict(const std::vector<double>& numeric, const VoxelGrid& grid) {
    Rng rng(0);  // unused: dropout is inactive outside training
    const Tensor out = forward(Tensor::vec(numeric), voxel_to_tensor(grid), false, rng);
    std::vector<double> y(out.data);
    for (std::size_t k = 0; k < y.size(); ++k)
        y[k] = y[k] * label_stats_.stddev[k] + label_stats_.mean[k];
    return y;
}

std::vector<Network::ParamBlock> Network::param_blocks() {
    std::vector<ParamBlock> blocks;
    auto visit = [&](std::vector<std::unique_ptr<Layer>>& layers) {
        for (auto& l : layers) {
            if (l->weights()) blocks.push_back({l->weights(), l->weight_grads(), true});
            if (l->biases()) blocks.push_back({l->biases(), l->bias_grads(), false});
        }
    };
    visit(voxel_layers_);
    visit(numeric_layers_);
    visit(trunk_layers_);
    return blocks;
}

std::size_t Network::n_params() const {
    std::size_t n = 0;
    auto visit = [&](const std::vector<std::unique_ptr<Layer>>& layers) {
        for (const auto& l : layers) {
            auto* mut = const_cast<Layer*>(l.get());
            if (mut->weights()) n += mut->weights()->size();
            if (mut->biases()) n += mut->biases()->size();
        }
    };
    visit(voxel_layers_);
    visit(numeric_layers_);
    visit(trunk_layers_);
    return n;
}

void Network::zero_grads() {
    for (auto& b : param_blocks()) std::fill(b.grads->begin(), b.grads->end(), 0.0);
}

std::vector<double> Network::flat_params() const {
    std::vector<double> out;
    out.reserve(n_params());
    auto visit = [&](const std::vector<std::unique_ptr<Layer>>& layers) {
        for (const auto& l : layers) {
            auto* mut = const_cast<Layer*>(l.get());
            if (mut->weights()) out.insert(out.end(), mut->weights()->begin(), mut->weights()->end());
            if (mut->biases()) out.insert(out.end(), mut->biases()->begin(), mut->biases()->end());
        }
    };
    visit(voxel_layers_);
    visit(numeric_layers_);
    visit(trunk_layers_);
    return out;
}

void Network::set_flat_params(const std::vector<double>& p) {
    if (p.size() != n_params()) throw ShapeMismatchError("flat parameter vector size mismatch");
    std::size_t off = 0;
    for (auto& b : param_blocks()) {
        std::copy(p.begin() + static_cast<std::ptrdiff_t>(off),
                  p.begin() + static_cast<std::ptrdiff_t>(off + b.values->size()), b.values->begin());
        off += b.values->size();
    }
}

double loss(Network& net, const std::vector<std::vector<double>>& x1,
            const std::vector<const VoxelGrid*>& x2, const std::vector<std::vector<double>>& y,
            double lambda_l2, const std::vector<double>* sample_weights) {
    if (x1.empty() || x1.size() != x2.size() || x1.size() != y.size())
        throw ShapeMismatchError("batch arrays must be nonempty and of equal length");
    Rng rng(0);
    const auto& ls = net.label_stats();
    double total = 0.0;
    for (std::size_t k = 0; k < x1.size(); ++k) {
        const Tensor out = net.forward(Tensor::vec(x1[k]), net.voxel_to_tensor(*x2[k]), false, rng);
        const double w = sample_weights ? (*sample_weights)[k] : 1.0;
        for (std::size_t c = 0; c < out.size(); ++c) {
            const double y_raw = out.data[c] * ls.stddev[c] + ls.mean[c];
            const double e = y_raw - y[k][c];
            total += w * e * e;
        }
    }
    total /= static_cast<double>(x1.size());
    if (lambda_l2 != 0.0) {
        double reg = 0.0;
        for (auto& b : net.param_blocks())
            if (b.regularized)
                for (double v : *b.values) reg += v * v;
        total += lambda_l2 * reg;
    }
    return total;
}

double gradients(Network& net, const std::vector<std::vector<double>>& x1,
                 const std::vector<const VoxelGrid*>& x2, const std::vector<std::vector<double>>& y,
                 double lambda_l2, Rng& rng, const std::vector<double>* sample_weights) {
    if (x1.empty() || x1.size() != x2.size() || x1.size() != y.size())
        throw ShapeMismatchError("batch arrays must be nonempty and of equal length");
    net.zero_grads();
    const auto& ls = net.label_stats();
    const double inv_b = 1.0 / static_cast<double>(x1.size());
    double total = 0.0;
    for (std::size_t k = 0; k < x1.size(); ++k) {
        const Tensor out = net.forward(Tensor::vec(x1[k]), net.voxel_to_tensor(*x2[k]), true, rng);
        const double w = sample_weights ? (*sample_weights)[k] : 1.0;
        Tensor g({static_cast<int>(out.size())});
        for (std::size_t c = 0; c < out.size(); ++c) {
            const double y_raw = out.data[c] * ls.stddev[c] + ls.mean[c];
            const double e = y_raw - y[k][c];
            total += w * e * e;
            g.data[c] = 2.0 * w * e * ls.stddev[c] * inv_b;
        }
        net.backward(g);
    }
    total *= inv_b;
    if (lambda_l2 != 0.0) {
        for (auto& b : net.param_blocks()) {
            if (!b.regularized) continue;
            for (std::size_t i = 0; i < b.values->size(); ++i) {
                total += lambda_l2 * (*b.values)[i] * (*b.values)[i];
                (*b.grads)[i] += 2.0 * lambda_l2 * (*b.values)[i];
            }
        }
    }
    return total;
}

void sgd_step(std::vector<double>& params, const std::vector<double>& grads, double alpha) {
    if (params.size() != grads.size()) throw ShapeMismatchError("parameter/gradient size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= alpha * grads[i];
}

void adam_amsgrad_step(AdamState& state, std::vector<double>& params,
                       const std::vector<double>& grads, double alpha, double beta1, double beta2,
                       double eps) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeMismatchError("optimizer state size mismatch");
    ++state.t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double v_corr = state.v[i] / bc2;
        if (v_corr > state.vhat[i]) state.vhat[i] = v_corr;
        const double m_corr = state.m[i] / bc1;
        params[i] -= alpha * m_corr / (std::sqrt(state.vhat[i]) + eps);
    }
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void write_layer_spec(io::BinaryWriter& w, const LayerSpec& s) {
    w.u8(static_cast<std::uint8_t>(s.kind));
    switch (s.kind) {
        case LayerKind::Dense:
            w.u32(static_cast<std::uint32_t>(s.units));
            break;
        case LayerKind::Conv3D:
            w.u32(static_cast<std::uint32_t>(s.filters));
            w.u32(static_cast<std::uint32_t>(s.kernel));
            w.u32(static_cast<std::uint32_t>(s.stride));
            break;
        case LayerKind::MaxPool3D:
            w.u32(static_cast<std::uint32_t>(s.window));
            break;
        case LayerKind::Dropout:
            w.f64(s.rate);
            break;
        default:
            break;
    }
}

LayerSpec read_layer_spec(io::BinaryReader& r) {
    LayerSpec s;
    const auto kind = r.u8();
    if (kind > static_cast<std::uint8_t>(LayerKind::Standardize))
        throw CorruptFileError("unknown layer kind in " + r.path());
    s.kind = static_cast<LayerKind>(kind);
    switch (s.kind) {
        case LayerKind::Dense:
            s.units = static_cast<int>(r.u32());
            break;
        case LayerKind::Conv3D:
            s.filters = static_cast<int>(r.u32());
            s.kernel = static_cast<int>(r.u32());
            s.stride = static_cast<int>(r.u32());
            break;
        case LayerKind::MaxPool3D:
            s.window = static_cast<int>(r.u32());
            break;
        case LayerKind::Dropout:
            s.rate = r.f64();
            break;
        default:
            break;
    }
    return s;
}

void write_stats(io::BinaryWriter& w, const FeatureStats& s) {
    w.u32(static_cast<std::uint32_t>(s.mean.size()));
    w.f64s(s.mean.data(), s.mean.size());
    w.f64s(s.stddev.data(), s.stddev.size());
}

FeatureStats read_stats(io::BinaryReader& r) {
    FeatureStats s;
    const auto n = r.u32();
    s.mean.resize(n);
    s.stddev.resize(n);
    r.f64s(s.mean.data(), n);
    r.f64s(s.stddev.data(), n);
    return s;
}

}  // namespace

void save_checkpoint(const Network& net, const std::string& path) {
    io::BinaryWriter w(path);
    w.magic("MUQM");
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(net.grid_n()));
    w.u32(static_cast<std::uint32_t>(net.numeric_dim()));
    w.u32(static_cast<std::uint32_t>(net.n_outputs()));

    const Topology& t = net.topology();
    w.u32(static_cast<std::uint32_t>(t.voxel_branch.size()));
    for (const auto& s : t.voxel_branch) write_layer_spec(w, s);
    w.u32(static_cast<std::uint32_t>(t.numeric_branch.size()));
    for (const auto& s : t.numeric_branch) write_layer_spec(w, s);
    w.u8(static_cast<std::uint8_t>(LayerKind::Concat));  // branch join marker
    w.u32(static_cast<std::uint32_t>(t.trunk.size()));
    for (const auto& s : t.trunk) write_layer_spec(w, s);

    write_stats(w, net.input_stats());
    write_stats(w, net.label_stats());
    w.u32(net.meta().epochs_run);
    w.f64(net.meta().best_val_loss);
    w.u64(net.meta().seed);

    const std::vector<double> params = net.flat_params();
    w.u64(params.size());
    w.f64s(params.data(), params.size());
    if (!w.good()) throw Error("write failed: " + path);
}

Network load_checkpoint(const std::string& path) {
    io::BinaryReader r(path);
    r.expect_magic("MUQM");
    if (r.u32() != kCheckpointVersion) throw CorruptFileError("unsupported checkpoint version in " + path);
    const auto grid_n = static_cast<int>(r.u32());
    const auto numeric_dim = static_cast<int>(r.u32());
    const auto n_out = r.u32();

    Topology t;
    const auto nv = r.u32();
    for (std::uint32_t i = 0; i < nv; ++i) t.voxel_branch.push_back(read_layer_spec(r));
    const auto nn = r.u32();
    for (std::uint32_t i = 0; i < nn; ++i) t.numeric_branch.push_back(read_layer_spec(r));
    if (r.u8() != static_cast<std::uint8_t>(LayerKind::Concat))
        throw CorruptFileError("missing branch join marker in " + path);
    const auto nt = r.u32();
    for (std::uint32_t i = 0; i < nt; ++i) t.trunk.push_back(read_layer_spec(r));

    const FeatureStats input_stats = read_stats(r);
    const FeatureStats label_stats = read_stats(r);
    TrainingMeta meta;
    meta.epochs_run = r.u32();
    meta.best_val_loss = r.f64();
    meta.seed = r.u64();

    Network net(std::move(t), grid_n, numeric_dim, meta.seed);
    if (net.n_outputs() != n_out) throw CorruptFileError("output size mismatch in " + path);
    net.input_stats() = input_stats;
    net.label_stats() = label_stats;
    net.meta() = meta;

    const auto np = r.u64();
    if (np != net.n_params()) throw CorruptFileError("parameter count mismatch in " + path);
    std::vector<double> params(np);
    r.f64s(params.data(), np);
    net.set_flat_params(params);
    return net;
}

}  // namespace muq::nn
