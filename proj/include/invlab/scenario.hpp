#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>

#include "invlab/hazard_model.hpp"
#include "invlab/path_engine.hpp"
#include "invlab/path_functionals.hpp"

namespace invlab {

/// A simulated batch together with the model that generated it and the
/// closed-form functionals along its paths. Non-copyable: the functionals are
/// large and every suite reads the same instance.
struct Scenario {
    HazardModel model;
    ScenarioBatch batch;
    PathFunctionals functionals;
    std::uint64_t seed;

    Scenario(const Scenario&) = delete;
    Scenario& operator=(const Scenario&) = delete;

    const TimeGrid& grid() const { return batch.grid(); }
    std::size_t n_paths() const { return batch.n_paths(); }
    const ModelConfig& config() const { return model.config(); }

    static std::unique_ptr<Scenario> make(const ModelConfig& config, const TimeGrid& grid, std::size_t n_paths,
                                          std::uint64_t seed) {
        HazardModel model(config);
        ScenarioBatch batch = simulate_batch(config, grid, n_paths, RngSpec{seed});
        sample_tau(batch, model);
        return std::unique_ptr<Scenario>(new Scenario(std::move(model), std::move(batch), seed));
    }

private:
    Scenario(HazardModel m, ScenarioBatch b, std::uint64_t s)
        : model(std::move(m)), batch(std::move(b)), functionals(batch, model), seed(s) {}
};

}  // namespace invlab
