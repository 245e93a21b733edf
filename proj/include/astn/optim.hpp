#ifndef ASTN_OPTIM_HPP
#define ASTN_OPTIM_HPP

#include <cmath>
#include <unordered_map>
#include <vector>

#include "astn/tensor.hpp"

namespace astn {

/// RMSprop with squared-gradient decay alpha and stabilizer eps.
/// The step schedule multiplies the base rate by `decay`
/// every `decay_every` epochs.
struct RmsProp {
    double alpha = 0.99;
    double eps = 1e-8;

    struct Group {
        std::vector<Tensor> params;
        double base_lr = 1e-4;
    };
    std::vector<Group> groups;
    std::unordered_map<TensorNode*, std::vector<double>> acc;

    void add_group(std::vector<Tensor> params, double base_lr) {
        groups.push_back({std::move(params), base_lr});
    }

    static double schedule(double base_lr, int epoch, int decay_every = 40, double decay = 0.1) {
        if (decay_every <= 0) return base_lr;
        return base_lr * std::pow(decay, epoch / decay_every);
    }

    void zero_grad() {
        for (auto& g : groups)
            for (auto& p : g.params) p.zero_grad();
    }

    /// One update using each group's base_lr scaled by `lr_scale`.
    void step(double lr_scale = 1.0) {
        for (auto& g : groups) {
            for (auto& p : g.params) {
                if (p.grad().size() != p.size()) continue; // no grad reached this param
                auto& a = acc[p.node().get()];
                if (a.size() != p.size()) a.assign(p.size(), 0.0);
                auto& data = p.mutable_data();
                const auto& grad = p.grad();
                for (std::size_t i = 0; i < data.size(); ++i) {
                    a[i] = alpha * a[i] + (1.0 - alpha) * grad[i] * grad[i];
                    data[i] -= g.base_lr * lr_scale * grad[i] / (std::sqrt(a[i]) + eps);
                }
            }
        }
    }
};

} // namespace astn

#endif
