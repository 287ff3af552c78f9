#ifndef LAVARNET_DATAGEN_HPP
#define LAVARNET_DATAGEN_HPP

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "lavarnet/series.hpp"
#include "lavarnet/tensor.hpp"

namespace lavarnet {

// Variables are zero-based; lags start at 1.
struct LaggedEdge {
    std::size_t source = 0;
    std::size_t lag = 1;
    std::size_t target = 0;

    auto operator<=>(const LaggedEdge&) const = default;
};

struct LaggedVariable {
    std::size_t variable = 0;
    std::size_t lag = 1;

    auto operator<=>(const LaggedVariable&) const = default;
};

// Ground-truth driving structure of a simulated system.
class CouplingNetwork {
public:
    CouplingNetwork() = default;
    // Throws ContractError if an edge has a variable >= K or a lag outside 1..P.
    CouplingNetwork(std::size_t K, std::size_t P, std::set<LaggedEdge> edges);

    std::size_t K() const { return K_; }
    std::size_t P() const { return P_; }
    const std::set<LaggedEdge>& edges() const { return edges_; }

    // L_k: lagged variables driving target k.
    std::set<LaggedVariable> driving_lagged(std::size_t target) const;
    // V_k: variables driving target k (projection of L_k).
    std::set<std::size_t> driving_variables(std::size_t target) const;
    bool drives(std::size_t source, std::size_t lag, std::size_t target) const {
        return edges_.contains({source, lag, target});
    }

    bool operator==(const CouplingNetwork&) const = default;

private:
    std::size_t K_ = 0;
    std::size_t P_ = 0;
    std::set<LaggedEdge> edges_;
};

// Erdos-Renyi causality network: every ordered pair j -> k (j != k) is kept
// with probability `density`; self-edges are always present; every kept pair
// carries all lags 1..P.
CouplingNetwork gen_er_network(std::size_t K, std::size_t P, double density, std::uint64_t seed);

struct VarCoefficients {
    std::vector<Tensor> lags;  // lags[tau - 1] is the K x K matrix of lag tau
    double noise_std = 1.0;

    std::size_t K() const { return lags.empty() ? 0 : lags.front().rows(); }
    std::size_t P() const { return lags.size(); }
};

// Largest eigenvalue modulus of the KP x KP companion matrix.
double companion_spectral_radius(const VarCoefficients& coeffs);

// Draws U[-1, 1] coefficients on the entries allowed by `network` (entry
// (k, j) of lag tau iff j drives k at lag tau), then shrinks all lag matrices
// by a common factor until the companion spectral radius is <= max_radius.
VarCoefficients draw_var_coefficients(const CouplingNetwork& network, std::uint64_t seed,
                                      double max_radius = 0.95);

// Simulates x_t = sum_tau Phi_tau x_{t-tau} + eps_t. The raw trajectory
// starts with the P rows of `initial` (zeros if empty); rows
// [burn_in, burn_in + L) of it are returned.
SeriesMatrix simulate_var(const VarCoefficients& coeffs, std::size_t L, std::size_t burn_in,
                          std::uint64_t seed, const SeriesMatrix& initial = {});

SeriesMatrix gen_var(const CouplingNetwork& network, std::size_t L, std::size_t burn_in,
                     std::uint64_t seed);

struct HenonChain {
    SeriesMatrix series;
    CouplingNetwork network;
};

// Chain-coupled Henon maps:
//   x_{k,t} = 1.4 - (C * m_{k,t-1} + (1 - C) * x_{k,t-1})^2 + 0.3 * x_{k,t-2}
// with m the mean of the neighbors' previous values (interior variables) or
// the single neighbor's previous value (chain ends). With K = 1 the driving
// term is x_{k,t-1} and the standard Henon map results.
//
// `initial` holds two rows, x_{t-2} then x_{t-1}; the raw trajectory starts
// with them and rows [burn_in, burn_in + L) are returned.
SeriesMatrix simulate_henon_chain(const SeriesMatrix& initial, std::size_t L, double coupling,
                                  std::size_t burn_in);

// Self lags 1 and 2, neighbor lag 1.
CouplingNetwork henon_chain_network(std::size_t K);

// Random initial conditions in [-0.5, 0.5], redrawn while any value leaves
// [-10, 10]; GenerationError after 100 divergent draws.
HenonChain gen_henon_chain(std::size_t K, std::size_t L, double coupling, std::size_t burn_in,
                           std::uint64_t seed);

// JSON ground truth: {"K", "P", "lagged_edges": [{"source", "lag", "target"}]}
// with one-based variable indices.
std::string network_to_json(const CouplingNetwork& network);
CouplingNetwork network_from_json(const std::string& text);
void save_network(const std::filesystem::path& path, const CouplingNetwork& network);
CouplingNetwork load_network(const std::filesystem::path& path);

}  // namespace lavarnet

#endif  // LAVARNET_DATAGEN_HPP
