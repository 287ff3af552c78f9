#include "lavarnet/datagen.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <json.hpp>

#include "lavarnet/errors.hpp"
#include "lavarnet/random.hpp"

namespace lavarnet {

namespace {

constexpr double kHenonA = 1.4;
constexpr double kHenonB = 0.3;
constexpr double kDivergenceBound = 10.0;
constexpr int kMaxHenonDraws = 100;

}  // namespace

CouplingNetwork::CouplingNetwork(std::size_t K, std::size_t P, std::set<LaggedEdge> edges)
    : K_(K), P_(P), edges_(std::move(edges)) {
    for (const LaggedEdge& e : edges_) {
        if (e.source >= K_ || e.target >= K_)
            throw ContractError(fmt::format("edge {}->{} outside {} variables", e.source, e.target, K_));
        if (e.lag < 1 || e.lag > P_)
            throw ContractError(fmt::format("edge lag {} outside 1..{}", e.lag, P_));
    }
}

std::set<LaggedVariable> CouplingNetwork::driving_lagged(std::size_t target) const {
    std::set<LaggedVariable> out;
    for (const LaggedEdge& e : edges_)
        if (e.target == target) out.insert({e.source, e.lag});
    return out;
}

std::set<std::size_t> CouplingNetwork::driving_variables(std::size_t target) const {
    std::set<std::size_t> out;
    for (const LaggedEdge& e : edges_)
        if (e.target == target) out.insert(e.source);
    return out;
}

CouplingNetwork gen_er_network(std::size_t K, std::size_t P, double density, std::uint64_t seed) {
    if (!(density >= 0.0 && density <= 1.0))
        throw ContractError(fmt::format("network density {} outside [0, 1]", density));
    if (K == 0 || P == 0) throw ContractError("network needs K >= 1 and P >= 1");
    Rng rng(seed);
    std::set<LaggedEdge> edges;
    for (std::size_t target = 0; target < K; ++target)
        for (std::size_t source = 0; source < K; ++source) {
            // Draw for every pair so the stream does not depend on density.
            const double u = rng.uniform();
            if (source != target && !(u < density)) continue;
            for (std::size_t lag = 1; lag <= P; ++lag) edges.insert({source, lag, target});
        }
    return CouplingNetwork(K, P, std::move(edges));
}

double companion_spectral_radius(const VarCoefficients& coeffs) {
    const std::size_t K = coeffs.K(), P = coeffs.P();
    const auto n = static_cast<Eigen::Index>(K * P);
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t tau = 0; tau < P; ++tau)
        for (std::size_t r = 0; r < K; ++r)
            for (std::size_t c = 0; c < K; ++c)
                companion(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(tau * K + c)) =
                    coeffs.lags[tau].at(r, c);
    for (std::size_t i = K; i < K * P; ++i)
        companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - K)) = 1.0;
    const Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

VarCoefficients draw_var_coefficients(const CouplingNetwork& network, std::uint64_t seed,
                                      double max_radius) {
    const std::size_t K = network.K(), P = network.P();
    for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng(derive_seed(seed, attempt));
        VarCoefficients coeffs;
        coeffs.lags.assign(P, Tensor(Shape(K, K)));
        bool nonzero = false;
        for (const LaggedEdge& e : network.edges()) {
            const double v = rng.uniform(-1.0, 1.0);
            coeffs.lags[e.lag - 1].at(e.target, e.source) = v;
            nonzero = nonzero || v != 0.0;
        }
        if (!nonzero && !network.edges().empty()) continue;

        for (double radius = companion_spectral_radius(coeffs); radius > max_radius;
             radius = companion_spectral_radius(coeffs)) {
            const double factor = std::min(0.99, max_radius / radius);
            for (Tensor& m : coeffs.lags)
                for (double& v : m.values()) v *= factor;
        }
        return coeffs;
    }
}

SeriesMatrix simulate_var(const VarCoefficients& coeffs, std::size_t L, std::size_t burn_in,
                          std::uint64_t seed, const SeriesMatrix& initial) {
    const std::size_t K = coeffs.K(), P = coeffs.P();
    if (K == 0 || P == 0) throw ContractError("simulate_var: empty coefficient set");
    if (!initial.empty() && (initial.rows() != P || initial.cols() != K))
        throw DimensionError(fmt::format("simulate_var: initial history is {}x{}, need {}x{}",
                                         initial.rows(), initial.cols(), P, K));
    const std::size_t total = burn_in + L;
    SeriesMatrix raw(std::max(total, P), K);
    if (!initial.empty())
        for (std::size_t r = 0; r < P; ++r)
            for (std::size_t c = 0; c < K; ++c) raw(r, c) = initial(r, c);

    Rng rng(seed);
    for (std::size_t t = P; t < total; ++t) {
        for (std::size_t k = 0; k < K; ++k) {
            double acc = 0.0;
            for (std::size_t tau = 1; tau <= P; ++tau) {
                const auto prev = raw.row(t - tau);
                for (std::size_t j = 0; j < K; ++j) acc += coeffs.lags[tau - 1].at(k, j) * prev[j];
            }
            raw(t, k) = acc;
        }
        if (coeffs.noise_std != 0.0)
            for (std::size_t k = 0; k < K; ++k) raw(t, k) += coeffs.noise_std * rng.normal();
    }
    return raw.row_block(burn_in, L);
}

SeriesMatrix gen_var(const CouplingNetwork& network, std::size_t L, std::size_t burn_in,
                     std::uint64_t seed) {
    const VarCoefficients coeffs = draw_var_coefficients(network, derive_seed(seed, 1));
    return simulate_var(coeffs, L, burn_in, derive_seed(seed, 2));
}

SeriesMatrix simulate_henon_chain(const SeriesMatrix& initial, std::size_t L, double coupling,
                                  std::size_t burn_in) {
    if (initial.rows() != 2 || initial.cols() == 0)
        throw DimensionError("simulate_henon_chain: initial history must be 2 x K");
    const std::size_t K = initial.cols();
    const std::size_t total = std::max<std::size_t>(burn_in + L, 2);
    SeriesMatrix raw(total, K);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t k = 0; k < K; ++k) raw(r, k) = initial(r, k);

    for (std::size_t t = 2; t < total; ++t) {
        for (std::size_t k = 0; k < K; ++k) {
            const double own = raw(t - 1, k);
            double drive = own;
            if (K > 1) {
                double neighbours;
                if (k == 0)
                    neighbours = raw(t - 1, 1);
                else if (k == K - 1)
                    neighbours = raw(t - 1, K - 2);
                else
                    neighbours = 0.5 * (raw(t - 1, k - 1) + raw(t - 1, k + 1));
                drive = coupling * neighbours + (1.0 - coupling) * own;
            }
            raw(t, k) = kHenonA - drive * drive + kHenonB * raw(t - 2, k);
        }
    }
    return raw.row_block(burn_in, L);
}

CouplingNetwork henon_chain_network(std::size_t K) {
    std::set<LaggedEdge> edges;
    for (std::size_t k = 0; k < K; ++k) {
        edges.insert({k, 1, k});
        edges.insert({k, 2, k});
        if (k > 0) edges.insert({k - 1, 1, k});
        if (k + 1 < K) edges.insert({k + 1, 1, k});
    }
    return CouplingNetwork(K, 2, std::move(edges));
}

HenonChain gen_henon_chain(std::size_t K, std::size_t L, double coupling, std::size_t burn_in,
                           std::uint64_t seed) {
    if (K == 0) throw ContractError("gen_henon_chain: K must be at least 1");
    Rng rng(seed);
    for (int draw = 0; draw < kMaxHenonDraws; ++draw) {
        SeriesMatrix initial(2, K);
        for (double& v : initial.values()) v = rng.uniform(-0.5, 0.5);
        // Simulate from the start so divergence during burn-in is caught too.
        SeriesMatrix full = simulate_henon_chain(initial, burn_in + L, coupling, 0);
        bool bounded = true;
        for (double v : full.values())
            if (!(std::abs(v) <= kDivergenceBound)) {
                bounded = false;
                break;
            }
        if (bounded) return {full.row_block(burn_in, L), henon_chain_network(K)};
    }
    throw GenerationError(fmt::format(
        "coupled Henon chain (K={}, coupling={}, seed={}) diverged for {} initial conditions", K,
        coupling, seed, kMaxHenonDraws));
}

std::string network_to_json(const CouplingNetwork& network) {
    nlohmann::ordered_json doc;
    doc["K"] = network.K();
    doc["P"] = network.P();
    doc["lagged_edges"] = nlohmann::ordered_json::array();
    for (const LaggedEdge& e : network.edges())
        doc["lagged_edges"].push_back(
            nlohmann::ordered_json{{"source", e.source + 1}, {"lag", e.lag}, {"target", e.target + 1}});
    return doc.dump(2) + "\n";
}

CouplingNetwork network_from_json(const std::string& text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        const auto K = doc.at("K").get<std::size_t>();
        const auto P = doc.at("P").get<std::size_t>();
        std::set<LaggedEdge> edges;
        for (const auto& e : doc.at("lagged_edges")) {
            const auto source = e.at("source").get<std::size_t>();
            const auto target = e.at("target").get<std::size_t>();
            if (source == 0 || target == 0) throw DataError("variable indices are one-based");
            edges.insert({source - 1, e.at("lag").get<std::size_t>(), target - 1});
        }
        return CouplingNetwork(K, P, std::move(edges));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("network JSON: {}", e.what()));
    } catch (const ContractError& e) {
        throw DataError(fmt::format("network JSON: {}", e.what()));
    }
}

void save_network(const std::filesystem::path& path, const CouplingNetwork& network) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    out << network_to_json(network);
}

CouplingNetwork load_network(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open network file '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return network_from_json(ss.str());
}

}  // namespace lavarnet
