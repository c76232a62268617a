// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "s2r/geometry.hpp"
#include "s2r/grid.hpp"
#include "s2r/io.hpp"
#include "s2r/pointcloud.hpp"
#include "s2r/rng.hpp"

namespace s2r {

// ---------------------------------------------------------------------------
// Stable scalar nonlinearities.

inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

inline double softplus(double u) {
  if (u > 35.0) return u;
  if (u < -35.0) return std::exp(u);
  return std::log1p(std::exp(u));
}

// Smooth ReLU-like activation: u * sigmoid(u). Zero at zero, so an all-zero
// grid propagates to exactly the head biases; smooth everywhere, so central
// finite differences stay honest.
inline double silu(double u) { return u * stable_sigmoid(u); }

inline double silu_grad(double u) {
  double s = stable_sigmoid(u);
  return s * (1.0 + u * (1.0 - s));
}

// ---------------------------------------------------------------------------
// Named parameters.

enum class ParamScope : std::uint8_t { kShared = 0, kSimInput = 1, kRealInput = 2 };

inline const char* param_scope_name(ParamScope s) {
  switch (s) {
    case ParamScope::kSimInput: return "sim";
    case ParamScope::kRealInput: return "real";
    default: return "shared";
  }
}

struct Param {
  std::string name;
  ParamScope scope = ParamScope::kShared;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<double> velocity;

  std::size_t numel() const { return value.size(); }
};

// ---------------------------------------------------------------------------
// Model definition. A BEV-native stack: a per-domain input embedding, two
// shared per-cell hidden layers, one shared 3x3 neighborhood-mixing layer
// producing the BEV feature map, and a per-cell detection head on top.

struct ModelConfig {
  int d_feat = 32;      // trunk width == BEV feature channels
  int num_classes = 4;
  int roi_grid = 4;     // RoI pooling grid side G
  bool domain_aware = true;
  BevGridConfig grid;
  double obj_bias_init = -4.0;

  int head_channels() const { return 1 + num_classes + 8; }
};

// Fixed input standardization so raw pillar statistics (counts, meters,
// seconds) arrive at comparable magnitudes. Part of the architecture, not
// learned.
inline constexpr double kPillarScale[kRealPillarChannels] = {0.125, 1.0, 1.0,
                                                             0.025, 1.0, 20.0};

struct ForwardResult {
  Domain domain = Domain::kSim;
  Grid x_scaled;  // standardized input, channel count of the used input layer
  Grid u0, a0, u1, a1, u2, a2;  // pre-activations and activations
  Grid bev;     // trunk output consumed by RoI pooling
  Grid logits;  // head output: [objectness, class logits, box regression]
};

class DetectorModel {
 public:
  explicit DetectorModel(const ModelConfig& cfg, std::uint64_t init_seed = 1)
      : cfg_(cfg) {
    const int d = cfg.d_feat;
    if (cfg.domain_aware) {
      add_param("input.sim.weight", ParamScope::kSimInput, {kSimPillarChannels, d});
      add_param("input.sim.bias", ParamScope::kSimInput, {d});
      add_param("input.real.weight", ParamScope::kRealInput, {kRealPillarChannels, d});
      add_param("input.real.bias", ParamScope::kRealInput, {d});
    } else {
      add_param("input.shared.weight", ParamScope::kShared, {kSimPillarChannels, d});
      add_param("input.shared.bias", ParamScope::kShared, {d});
    }
    add_param("trunk.fc1.weight", ParamScope::kShared, {d, d});
    add_param("trunk.fc1.bias", ParamScope::kShared, {d});
    add_param("trunk.fc2.weight", ParamScope::kShared, {d, d});
    add_param("trunk.fc2.bias", ParamScope::kShared, {d});
    add_param("trunk.conv.weight", ParamScope::kShared, {3, 3, d, d});
    add_param("trunk.conv.bias", ParamScope::kShared, {d});
    add_param("head.weight", ParamScope::kShared, {d, cfg.head_channels()});
    add_param("head.bias", ParamScope::kShared, {cfg.head_channels()});
    init_params(init_seed);
  }

  const ModelConfig& config() const { return cfg_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  Param& param(const std::string& name) {
    for (auto& p : params_)
      if (p.name == name) return p;
    throw std::out_of_range("no parameter named " + name);
  }
  const Param& param(const std::string& name) const {
    return const_cast<DetectorModel*>(this)->param(name);
  }

  // Fraction of parameters that are domain-specific (the input layers).
  double domain_specific_fraction() const {
    std::size_t domain = 0, total = 0;
    for (const auto& p : params_) {
      total += p.numel();
      if (p.scope != ParamScope::kShared) domain += p.numel();
    }
    return total == 0 ? 0.0 : static_cast<double>(domain) / static_cast<double>(total);
  }

  int input_channels(Domain domain) const {
    if (!cfg_.domain_aware) return kSimPillarChannels;
    return domain == Domain::kSim ? kSimPillarChannels : kRealPillarChannels;
  }

  // -------------------------------------------------------------------------

  ForwardResult forward(const Grid& pillars, Domain domain) const {
    const int d = cfg_.d_feat;
    const int ci = input_channels(domain);
    if (pillars.c < ci)
      throw std::invalid_argument("input has fewer channels than the domain's input layer");

    ForwardResult f;
    f.domain = domain;
    f.x_scaled = Grid(pillars.h, pillars.w, ci);
    for (int y = 0; y < pillars.h; ++y)
      for (int x = 0; x < pillars.w; ++x) {
        const double* in = pillars.cell(y, x);
        double* out = f.x_scaled.cell(y, x);
        for (int i = 0; i < ci; ++i) out[i] = in[i] * kPillarScale[i];
      }

    const Param& wi = param(input_weight_name(domain));
    const Param& bi = param(input_bias_name(domain));
    f.u0 = linear_forward(f.x_scaled, wi, bi);
    f.a0 = activate(f.u0);
    f.u1 = linear_forward(f.a0, param("trunk.fc1.weight"), param("trunk.fc1.bias"));
    f.a1 = activate(f.u1);
    f.u2 = linear_forward(f.a1, param("trunk.fc2.weight"), param("trunk.fc2.bias"));
    f.a2 = activate(f.u2);
    f.bev = conv3x3_forward(f.a2, param("trunk.conv.weight"), param("trunk.conv.bias"), d);
    f.logits = linear_forward(f.bev, param("head.weight"), param("head.bias"));
    return f;
  }

  // Accumulates parameter gradients. `dlogits` and `dbev_extra` may be null
  // when that path carries no gradient (e.g. pure alignment batches).
  void backward(const ForwardResult& f, const Grid* dlogits, const Grid* dbev_extra) {
    const int d = cfg_.d_feat;
    Grid dbev(f.bev.h, f.bev.w, d);
    if (dbev_extra) {
      if (dbev_extra->numel() != dbev.numel())
        throw std::invalid_argument("dbev_extra shape mismatch");
      dbev.v = dbev_extra->v;
    }
    if (dlogits)
      linear_backward(f.bev, param("head.weight"), *dlogits, &dbev,
                      grad_of("head.weight"), grad_of("head.bias"));

    Grid da2(f.a2.h, f.a2.w, d);
    conv3x3_backward(f.a2, param("trunk.conv.weight"), dbev, da2,
                     grad_of("trunk.conv.weight"), grad_of("trunk.conv.bias"), d);
    Grid du2 = activation_backward(da2, f.u2);

    Grid da1(f.a1.h, f.a1.w, d);
    linear_backward(f.a1, param("trunk.fc2.weight"), du2, &da1, grad_of("trunk.fc2.weight"),
                    grad_of("trunk.fc2.bias"));
    Grid du1 = activation_backward(da1, f.u1);

    Grid da0(f.a0.h, f.a0.w, d);
    linear_backward(f.a0, param("trunk.fc1.weight"), du1, &da0, grad_of("trunk.fc1.weight"),
                    grad_of("trunk.fc1.bias"));
    Grid du0 = activation_backward(da0, f.u0);

    linear_backward(f.x_scaled, param(input_weight_name(f.domain)), du0, nullptr,
                    grad_of(input_weight_name(f.domain)), grad_of(input_bias_name(f.domain)));
  }

  void zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
  }

  // Heavy-ball SGD; `trainable` filters which parameters move.
  void sgd_step(double lr, double momentum,
                const std::function<bool(const Param&)>& trainable = {}) {
    for (auto& p : params_) {
      if (trainable && !trainable(p)) continue;
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        p.velocity[i] = momentum * p.velocity[i] - lr * p.grad[i];
        p.value[i] += p.velocity[i];
      }
    }
  }

  std::string input_weight_name(Domain domain) const {
    if (!cfg_.domain_aware) return "input.shared.weight";
    return domain == Domain::kSim ? "input.sim.weight" : "input.real.weight";
  }
  std::string input_bias_name(Domain domain) const {
    if (!cfg_.domain_aware) return "input.shared.bias";
    return domain == Domain::kSim ? "input.sim.bias" : "input.real.bias";
  }

 private:
  void add_param(const std::string& name, ParamScope scope, std::vector<int> shape) {
    Param p;
    p.name = name;
    p.scope = scope;
    p.shape = std::move(shape);
    std::size_t n = 1;
    for (int s : p.shape) n *= static_cast<std::size_t>(s);
    p.value.assign(n, 0.0);
    p.grad.assign(n, 0.0);
    p.velocity.assign(n, 0.0);
    params_.push_back(std::move(p));
  }

  void init_params(std::uint64_t seed) {
    for (auto& p : params_) {
      RngStream rng(key_fold(seed, fnv1a64(p.name.data(), p.name.size())));
      if (p.shape.size() == 1) continue;  // biases start at zero
      std::size_t fan_in = 1, fan_out = static_cast<std::size_t>(p.shape.back());
      for (std::size_t i = 0; i + 1 < p.shape.size(); ++i)
        fan_in *= static_cast<std::size_t>(p.shape[i]);
      if (p.shape.size() == 4) fan_out *= 9;  // conv kernel footprint
      double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& v : p.value) v = rng.uniform(-bound, bound);
    }
    param("head.bias").value[0] = cfg_.obj_bias_init;
  }

  std::vector<double>& grad_of(const std::string& name) { return param(name).grad; }

  static Grid linear_forward(const Grid& in, const Param& w, const Param& b) {
    const int ci = w.shape[0], co = w.shape[1];
    if (in.c != ci) throw std::invalid_argument("linear layer channel mismatch");
    Grid out(in.h, in.w, co);
    for (int y = 0; y < in.h; ++y)
      for (int x = 0; x < in.w; ++x) {
        const double* src = in.cell(y, x);
        double* dst = out.cell(y, x);
        for (int j = 0; j < co; ++j) dst[j] = b.value[static_cast<std::size_t>(j)];
        for (int i = 0; i < ci; ++i) {
          double s = src[i];
          if (s == 0.0) continue;
          const double* wr = w.value.data() + static_cast<std::size_t>(i) * co;
          for (int j = 0; j < co; ++j) dst[j] += s * wr[j];
        }
      }
    return out;
  }

  static void linear_backward(const Grid& in, const Param& w, const Grid& dout, Grid* din,
                              std::vector<double>& gw, std::vector<double>& gb) {
    const int ci = w.shape[0], co = w.shape[1];
    for (int y = 0; y < in.h; ++y)
      for (int x = 0; x < in.w; ++x) {
        const double* src = in.cell(y, x);
        const double* g = dout.cell(y, x);
        for (int j = 0; j < co; ++j) gb[static_cast<std::size_t>(j)] += g[j];
        for (int i = 0; i < ci; ++i) {
          const double* wr = w.value.data() + static_cast<std::size_t>(i) * co;
          double* gwr = gw.data() + static_cast<std::size_t>(i) * co;
          double s = src[i];
          double acc = 0.0;
          for (int j = 0; j < co; ++j) {
            gwr[j] += s * g[j];
            acc += wr[j] * g[j];
          }
          if (din) din->cell(y, x)[i] += acc;
        }
      }
  }

  static Grid conv3x3_forward(const Grid& in, const Param& w, const Param& b, int d) {
    Grid out(in.h, in.w, d);
    for (int y = 0; y < in.h; ++y)
      for (int x = 0; x < in.w; ++x) {
        double* dst = out.cell(y, x);
        for (int j = 0; j < d; ++j) dst[j] = b.value[static_cast<std::size_t>(j)];
        for (int dy = 0; dy < 3; ++dy) {
          int sy = y + dy - 1;
          if (sy < 0 || sy >= in.h) continue;
          for (int dx = 0; dx < 3; ++dx) {
            int sx = x + dx - 1;
            if (sx < 0 || sx >= in.w) continue;
            const double* src = in.cell(sy, sx);
            const double* wtap =
                w.value.data() + (static_cast<std::size_t>(dy) * 3 + dx) * d * d;
            for (int i = 0; i < d; ++i) {
              double s = src[i];
              if (s == 0.0) continue;
              const double* wr = wtap + static_cast<std::size_t>(i) * d;
              for (int j = 0; j < d; ++j) dst[j] += s * wr[j];
            }
          }
        }
      }
    return out;
  }

  static void conv3x3_backward(const Grid& in, const Param& w, const Grid& dout, Grid& din,
                               std::vector<double>& gw, std::vector<double>& gb, int d) {
    for (int y = 0; y < in.h; ++y)
      for (int x = 0; x < in.w; ++x) {
        const double* g = dout.cell(y, x);
        for (int j = 0; j < d; ++j) gb[static_cast<std::size_t>(j)] += g[j];
        for (int dy = 0; dy < 3; ++dy) {
          int sy = y + dy - 1;
          if (sy < 0 || sy >= in.h) continue;
          for (int dx = 0; dx < 3; ++dx) {
            int sx = x + dx - 1;
            if (sx < 0 || sx >= in.w) continue;
            const double* src = in.cell(sy, sx);
            double* dsrc = din.cell(sy, sx);
            const std::size_t tap = (static_cast<std::size_t>(dy) * 3 + dx) * d * d;
            for (int i = 0; i < d; ++i) {
              const double* wr = w.value.data() + tap + static_cast<std::size_t>(i) * d;
              double* gwr = gw.data() + tap + static_cast<std::size_t>(i) * d;
              double s = src[i];
              double acc = 0.0;
              for (int j = 0; j < d; ++j) {
                gwr[j] += s * g[j];
                acc += wr[j] * g[j];
              }
              dsrc[i] += acc;
            }
          }
        }
      }
  }

  static Grid activate(const Grid& u) {
    Grid a(u.h, u.w, u.c);
    for (std::size_t i = 0; i < u.v.size(); ++i) a.v[i] = silu(u.v[i]);
    return a;
  }

  static Grid activation_backward(const Grid& da, const Grid& u) {
    Grid du(da.h, da.w, da.c);
    for (std::size_t i = 0; i < da.v.size(); ++i) du.v[i] = da.v[i] * silu_grad(u.v[i]);
    return du;
  }

  ModelConfig cfg_;
  std::vector<Param> params_;
};

// ---------------------------------------------------------------------------
// RoI-grid pooling: average of G x G bilinear samples uniformly covering the
// yaw-rotated box footprint. Samples are clamped to the map border.

namespace detail {

struct BilinearTap {
  int y0, x0, y1, x1;
  double w00, w01, w10, w11;
};

inline BilinearTap bilinear_tap(const BevGridConfig& gc, int h, int w, double wx, double wy) {
  double gx = gc.to_cell_x(wx);
  double gy = gc.to_cell_y(wy);
  int x0 = static_cast<int>(std::floor(gx));
  int y0 = static_cast<int>(std::floor(gy));
  double fx = gx - x0;
  double fy = gy - y0;
  BilinearTap t;
  t.x0 = std::clamp(x0, 0, w - 1);
  t.x1 = std::clamp(x0 + 1, 0, w - 1);
  t.y0 = std::clamp(y0, 0, h - 1);
  t.y1 = std::clamp(y0 + 1, 0, h - 1);
  t.w00 = (1.0 - fx) * (1.0 - fy);
  t.w01 = fx * (1.0 - fy);
  t.w10 = (1.0 - fx) * fy;
  t.w11 = fx * fy;
  return t;
}

template <typename Visit>
void for_each_roi_sample(const Box3D& box, int grid_side, Visit&& visit) {
  double yaw = deg_to_rad(box.yaw_deg);
  double c = std::cos(yaw), s = std::sin(yaw);
  for (int gi = 0; gi < grid_side; ++gi) {
    double u = ((gi + 0.5) / grid_side - 0.5) * box.length;
    for (int gj = 0; gj < grid_side; ++gj) {
      double v = ((gj + 0.5) / grid_side - 0.5) * box.width;
      visit(box.center.x + c * u - s * v, box.center.y + s * u + c * v);
    }
  }
}

}  // namespace detail

inline std::vector<std::vector<double>> roi_grid_pool(const Grid& bev,
                                                      const BevGridConfig& gc,
                                                      const std::vector<Box3D>& boxes,
                                                      int grid_side) {
  std::vector<std::vector<double>> feats(boxes.size());
  const double inv = 1.0 / (static_cast<double>(grid_side) * grid_side);
  for (std::size_t bi = 0; bi < boxes.size(); ++bi) {
    std::vector<double>& f = feats[bi];
    f.assign(static_cast<std::size_t>(bev.c), 0.0);
    detail::for_each_roi_sample(boxes[bi], grid_side, [&](double wx, double wy) {
      auto t = detail::bilinear_tap(gc, bev.h, bev.w, wx, wy);
      const double* c00 = bev.cell(t.y0, t.x0);
      const double* c01 = bev.cell(t.y0, t.x1);
      const double* c10 = bev.cell(t.y1, t.x0);
      const double* c11 = bev.cell(t.y1, t.x1);
      for (int ch = 0; ch < bev.c; ++ch)
        f[static_cast<std::size_t>(ch)] +=
            t.w00 * c00[ch] + t.w01 * c01[ch] + t.w10 * c10[ch] + t.w11 * c11[ch];
    });
    for (auto& v : f) v *= inv;
  }
  return feats;
}

// Scatters per-feature gradients back onto the BEV map; empty gradient
// vectors mark features that did not enter the loss.
inline void roi_grid_pool_backward(Grid& dbev, const BevGridConfig& gc,
                                   const std::vector<Box3D>& boxes, int grid_side,
                                   const std::vector<std::vector<double>>& dfeats) {
  const double inv = 1.0 / (static_cast<double>(grid_side) * grid_side);
  for (std::size_t bi = 0; bi < boxes.size(); ++bi) {
    if (dfeats[bi].empty()) continue;
    const std::vector<double>& g = dfeats[bi];
    detail::for_each_roi_sample(boxes[bi], grid_side, [&](double wx, double wy) {
      auto t = detail::bilinear_tap(gc, dbev.h, dbev.w, wx, wy);
      double* c00 = dbev.cell(t.y0, t.x0);
      double* c01 = dbev.cell(t.y0, t.x1);
      double* c10 = dbev.cell(t.y1, t.x0);
      double* c11 = dbev.cell(t.y1, t.x1);
      for (int ch = 0; ch < dbev.c; ++ch) {
        double gv = g[static_cast<std::size_t>(ch)] * inv;
        c00[ch] += t.w00 * gv;
        c01[ch] += t.w01 * gv;
        c10[ch] += t.w10 * gv;
        c11[ch] += t.w11 * gv;
      }
    });
  }
}

// ---------------------------------------------------------------------------
// Box regression codec. Targets are relative to the assigned cell center:
// [dx, dy, z, log l, log w, log h, sin yaw, cos yaw].

inline constexpr int kRegChannels = 8;

inline void encode_box_targets(const Box3D& box, double cell_cx, double cell_cy,
                               double* out8) {
  out8[0] = box.center.x - cell_cx;
  out8[1] = box.center.y - cell_cy;
  out8[2] = box.center.z;
  out8[3] = std::log(box.length);
  out8[4] = std::log(box.width);
  out8[5] = std::log(box.height);
  double yaw = deg_to_rad(box.yaw_deg);
  out8[6] = std::sin(yaw);
  out8[7] = std::cos(yaw);
}

inline Box3D decode_box_targets(const double* reg8, double cell_cx, double cell_cy,
                                int class_id) {
  Box3D box;
  box.center = {cell_cx + reg8[0], cell_cy + reg8[1], reg8[2]};
  box.length = std::exp(reg8[3]);
  box.width = std::exp(reg8[4]);
  box.height = std::exp(reg8[5]);
  box.yaw_deg = normalize_yaw_deg(rad_to_deg(std::atan2(reg8[6], reg8[7])));
  box.category_id = class_id;
  return box;
}

// ---------------------------------------------------------------------------
// Detection loss: focal objectness over all cells, cross-entropy and
// smooth-L1 at the positive cells (one per box, the cell containing the box
// center). Boxes outside the grid or colliding on an already-claimed cell are
// skipped and counted.

struct LossWeights {
  double lambda = 0.1;      // alignment weight
  double omega_real = 1.0;  // per-domain detection weights
  double omega_sim = 0.1;

  double omega(Domain d) const { return d == Domain::kReal ? omega_real : omega_sim; }
};

struct DetectionLossConfig {
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  double smooth_l1_beta = 1.0;
};

struct DetectionLossResult {
  double unweighted = 0.0;  // objectness + classification + regression
  double weighted = 0.0;    // omega * unweighted
  double omega = 1.0;
  int positives = 0;
  int ignored_boxes = 0;
  Grid dlogits;  // gradient of the weighted loss
};

inline DetectionLossResult detection_loss(const Grid& logits,
                                          const std::vector<Box3D>& labels, Domain domain,
                                          const LossWeights& weights,
                                          const BevGridConfig& gc, int num_classes,
                                          const DetectionLossConfig& cfg = {}) {
  const int n = gc.size();
  if (logits.h != n || logits.w != n || logits.c != 1 + num_classes + kRegChannels)
    throw std::invalid_argument("detection_loss: logits shape mismatch");

  DetectionLossResult res;
  res.omega = weights.omega(domain);
  res.dlogits = Grid(n, n, logits.c);

  // One positive cell per box, first box wins a contested cell.
  std::vector<int> assignment(static_cast<std::size_t>(n) * n, -1);
  for (std::size_t bi = 0; bi < labels.size(); ++bi) {
    const Box3D& b = labels[bi];
    if (!gc.contains(b.center.x, b.center.y)) {
      ++res.ignored_boxes;
      continue;
    }
    int ix = static_cast<int>(std::floor((b.center.x + gc.extent) / gc.cell));
    int iy = static_cast<int>(std::floor((b.center.y + gc.extent) / gc.cell));
    ix = std::clamp(ix, 0, n - 1);
    iy = std::clamp(iy, 0, n - 1);
    int& slot = assignment[static_cast<std::size_t>(iy) * n + ix];
    if (slot >= 0) {
      ++res.ignored_boxes;
      continue;
    }
    slot = static_cast<int>(bi);
    ++res.positives;
  }
  const double pos_norm = 1.0 / std::max(1, res.positives);

  double loss_obj = 0.0, loss_cls = 0.0, loss_reg = 0.0;
  const double alpha = cfg.focal_alpha, gamma = cfg.focal_gamma;

  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double* cell_logits = logits.cell(y, x);
      double* dcell = res.dlogits.cell(y, x);
      const int slot = assignment[static_cast<std::size_t>(y) * n + x];
      const double z = cell_logits[0];
      const double p = stable_sigmoid(z);

      if (slot >= 0) {
        double nlp = softplus(-z);  // -log p
        double q = 1.0 - p;
        loss_obj += alpha * std::pow(q, gamma) * nlp;
        dcell[0] = -alpha * std::pow(q, gamma) * (gamma * p * nlp + q) * pos_norm;

        const Box3D& box = labels[static_cast<std::size_t>(slot)];
        // Classification.
        double max_logit = cell_logits[1];
        for (int k = 1; k < num_classes; ++k)
          max_logit = std::max(max_logit, cell_logits[1 + k]);
        double denom = 0.0;
        for (int k = 0; k < num_classes; ++k)
          denom += std::exp(cell_logits[1 + k] - max_logit);
        double log_denom = std::log(denom) + max_logit;
        loss_cls += log_denom - cell_logits[1 + box.category_id];
        for (int k = 0; k < num_classes; ++k) {
          double soft = std::exp(cell_logits[1 + k] - log_denom);
          dcell[1 + k] = (soft - (k == box.category_id ? 1.0 : 0.0)) * pos_norm;
        }
        // Regression.
        double targets[kRegChannels];
        encode_box_targets(box, gc.cell_center_x(x), gc.cell_center_y(y), targets);
        for (int r = 0; r < kRegChannels; ++r) {
          double diff = cell_logits[1 + num_classes + r] - targets[r];
          double ad = std::abs(diff);
          if (ad < cfg.smooth_l1_beta) {
            loss_reg += 0.5 * diff * diff / cfg.smooth_l1_beta;
            dcell[1 + num_classes + r] = diff / cfg.smooth_l1_beta * pos_norm;
          } else {
            loss_reg += ad - 0.5 * cfg.smooth_l1_beta;
            dcell[1 + num_classes + r] = (diff > 0.0 ? 1.0 : -1.0) * pos_norm;
          }
        }
      } else {
        double nlq = softplus(z);  // -log(1-p)
        loss_obj += (1.0 - alpha) * std::pow(p, gamma) * nlq;
        dcell[0] = (1.0 - alpha) * std::pow(p, gamma) * (gamma * (1.0 - p) * nlq + p) * pos_norm;
      }
    }
  }

  res.unweighted = (loss_obj + loss_cls + loss_reg) * pos_norm;
  res.weighted = res.omega * res.unweighted;
  for (auto& g : res.dlogits.v) g *= res.omega;
  return res;
}

// ---------------------------------------------------------------------------
// Decoding and greedy center-distance suppression.

struct Prediction {
  Box3D box;
  double score = 0.0;
};

inline std::vector<Prediction> decode_predictions(const Grid& logits, const BevGridConfig& gc,
                                                  int num_classes, double score_threshold) {
  std::vector<Prediction> preds;
  const int n = gc.size();
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double* cell = logits.cell(y, x);
      double score = stable_sigmoid(cell[0]);
      if (score < score_threshold) continue;
      int best_class = 0;
      for (int k = 1; k < num_classes; ++k)
        if (cell[1 + k] > cell[1 + best_class]) best_class = k;
      Prediction pr;
      pr.score = score;
      pr.box = decode_box_targets(cell + 1 + num_classes, gc.cell_center_x(x),
                                  gc.cell_center_y(y), best_class);
      preds.push_back(pr);
    }
  return preds;
}

inline std::vector<Prediction> nms_center_distance(std::vector<Prediction> preds,
                                                   double radius) {
  std::stable_sort(preds.begin(), preds.end(), [](const Prediction& a, const Prediction& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.box.center.x != b.box.center.x) return a.box.center.x < b.box.center.x;
    return a.box.center.y < b.box.center.y;
  });
  std::vector<Prediction> kept;
  for (const auto& p : preds) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (std::hypot(p.box.center.x - k.box.center.x, p.box.center.y - k.box.center.y) <
          radius) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(p);
  }
  return kept;
}

inline std::vector<Prediction> predict(const DetectorModel& model, const PointCloud& cloud,
                                       double score_threshold, double nms_radius) {
  Grid pillars = featurize(cloud, model.config().grid);
  ForwardResult f = model.forward(pillars, cloud.domain());
  auto preds = decode_predictions(f.logits, model.config().grid,
                                  model.config().num_classes, score_threshold);
  return nms_center_distance(std::move(preds), nms_radius);
}

}  // namespace s2r
