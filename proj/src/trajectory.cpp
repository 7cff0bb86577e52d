#include "bhc/trajectory.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "bhc/operators.hpp"

namespace bhc {

TrajectoryState trajectory_from_fock(const FockSpace& sp, const FockState& s) {
    if (sp.global_index(s) < 0)
        throw std::invalid_argument("trajectory_from_fock: state outside the space");
    const int k = sp.sector_of(s.total());
    TrajectoryState st;
    st.current_N = s.total();
    st.psi = Eigen::VectorXcd::Zero(sp.sector(k).dim());
    st.psi(sp.sector(k).find(s)) = 1.0;
    return st;
}

TrajectoryState trajectory_from_vector(const FockSpace& sp, int N, Eigen::VectorXcd psi) {
    const int k = sp.sector_of(N);
    if (k < 0) throw std::invalid_argument("trajectory_from_vector: no sector with that N");
    if (psi.size() != sp.sector(k).dim())
        throw std::invalid_argument("trajectory_from_vector: vector does not match the sector");
    const double n2 = psi.squaredNorm();
    if (std::abs(n2 - 1.0) > 1e-8)
        throw std::invalid_argument("trajectory_from_vector: state must be normalized");
    TrajectoryState st;
    st.current_N = N;
    st.psi = psi / std::sqrt(n2);
    return st;
}

TrajectoryEngine::TrajectoryEngine(const ModelParams& p, const FockSpace& sp)
    : params_(p), space_(sp) {
    params_.validate();
    if (params_.L() != space_.L)
        throw std::invalid_argument("TrajectoryEngine: parameter and space site counts differ");
    if (space_.n_sectors() == 0) throw std::invalid_argument("TrajectoryEngine: empty space");

    bool any_gamma = false;
    for (double g : params_.gamma) any_gamma = any_gamma || g > 0.0;
    if (any_gamma && (space_.sectors.front().N != 0 ||
                      space_.n_sectors() != space_.sectors.back().N + 1))
        throw std::invalid_argument("TrajectoryEngine: dissipation needs the full sector cascade");

    for (int l = 1; l <= params_.L(); ++l)
        if (params_.gamma[l - 1] > 0.0)
            channels_.push_back({JumpKind::dissipation, l, params_.gamma[l - 1]});
    for (int l = 1; l <= params_.L(); ++l)
        if (params_.kappa[l - 1] > 0.0)
            channels_.push_back({JumpKind::dephasing, l, params_.kappa[l - 1]});

    sectors_.reserve(space_.n_sectors());
    for (int k = 0; k < space_.n_sectors(); ++k) {
        const auto& b = space_.sector(k);
        Eigen::MatrixXcd G =
            std::complex<double>(0.0, -1.0) * build_hamiltonian(params_, b).dense();
        const auto D = no_jump_decay(params_, b);
        for (int i = 0; i < b.dim(); ++i) G(i, i) -= 0.5 * D[i];

        std::vector<ChannelData> chan;
        chan.reserve(channels_.size());
        for (const auto& ch : channels_) {
            ChannelData cd;
            cd.weight.resize(b.dim());
            if (ch.kind == JumpKind::dissipation) {
                for (int i = 0; i < b.dim(); ++i)
                    cd.weight(i) = ch.rate * b.state(i).n[ch.site - 1];
                if (k > 0) cd.lower = build_lowering_map(ch.site, b, space_.sector(k - 1));
            } else {
                const auto w = dephasing_weights(ch.site, params_, b);
                cd.deph.resize(b.dim());
                for (int i = 0; i < b.dim(); ++i) {
                    cd.deph(i) = w[i];
                    cd.weight(i) = ch.rate * w[i] * w[i];
                }
            }
            chan.push_back(std::move(cd));
        }
        sectors_.push_back(SectorData{linalg::Propagator(std::move(G)), std::move(chan)});
    }
}

int TrajectoryEngine::sector_index(int N) const {
    const int k = space_.sector_of(N);
    if (k < 0) throw std::invalid_argument("TrajectoryEngine: no sector with that boson number");
    return k;
}

const linalg::Propagator& TrajectoryEngine::propagator(int N) const {
    return sectors_[sector_index(N)].prop;
}

double TrajectoryEngine::no_jump_step(int N, Eigen::VectorXcd& psi, double tau) const {
    const int k = sector_index(N);
    if (psi.size() != space_.sector(k).dim())
        throw std::invalid_argument("no_jump_step: state does not match its sector");
    psi = sectors_[k].prop.apply(tau, psi);
    return psi.squaredNorm();
}

Eigen::VectorXd TrajectoryEngine::channel_rates(int N, const Eigen::VectorXcd& psi) const {
    const int k = sector_index(N);
    if (psi.size() != space_.sector(k).dim())
        throw std::invalid_argument("channel_rates: state does not match its sector");
    const Eigen::VectorXd prob = psi.cwiseAbs2();
    Eigen::VectorXd r(static_cast<int>(channels_.size()));
    for (int c = 0; c < r.size(); ++c) r(c) = sectors_[k].chan[c].weight.dot(prob);
    return r;
}

int TrajectoryEngine::sample_jump(int N, const Eigen::VectorXcd& psi, Philox& rng) const {
    const Eigen::VectorXd rates = channel_rates(N, psi);
    const double total = rates.sum();
    if (!(total > 0.0))
        throw std::invalid_argument("sample_jump: no channel has positive rate");
    const double u = rng.uniform() * total;
    double cum = 0.0;
    int last = -1;
    for (int c = 0; c < rates.size(); ++c) {
        if (rates(c) <= 0.0) continue;
        last = c;
        cum += rates(c);
        if (u < cum) return c;
    }
    return last;
}

void TrajectoryEngine::apply_jump(TrajectoryState& st, int channel, double t) const {
    if (channel < 0 || channel >= static_cast<int>(channels_.size()))
        throw std::invalid_argument("apply_jump: channel out of range");
    const int k = sector_index(st.current_N);
    if (st.psi.size() != space_.sector(k).dim())
        throw std::invalid_argument("apply_jump: state does not match its sector");
    const Channel& ch = channels_[channel];
    const ChannelData& cd = sectors_[k].chan[channel];

    Eigen::VectorXcd out;
    if (ch.kind == JumpKind::dissipation) {
        if (cd.lower.rows() == 0)
            throw std::invalid_argument("apply_jump: no sector below");
        out = cd.lower.apply(st.psi);
    } else {
        out = st.psi;
        for (int i = 0; i < out.size(); ++i) out(i) *= cd.deph(i);
    }
    const double n2 = out.squaredNorm();
    if (!(n2 > 0.0))
        throw std::invalid_argument("apply_jump: collapse annihilates the state");
    st.psi = out / std::sqrt(n2);
    if (ch.kind == JumpKind::dissipation) st.current_N -= 1;
    st.jump_log.push_back({t, ch.kind, ch.site});
}

void run_trajectory(const TrajectoryEngine& eng, TrajectoryState& st,
                    const std::vector<double>& t_grid, Philox& rng,
                    const std::function<void(int, const TrajectoryState&)>& record,
                    double jump_tol) {
    if (t_grid.empty()) throw std::invalid_argument("run_trajectory: empty time grid");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1]))
            throw std::invalid_argument("run_trajectory: time grid must increase");
    if (!(jump_tol > 0.0)) throw std::invalid_argument("run_trajectory: jump_tol must be positive");
    const linalg::Propagator* prop = &eng.propagator(st.current_N);
    if (st.psi.size() != prop->dim())
        throw std::invalid_argument("run_trajectory: state does not match its sector");
    if (std::abs(st.psi.squaredNorm() - 1.0) > 1e-8)
        throw std::invalid_argument("run_trajectory: state must be normalized");

    bool diag = prop->diagonalized();
    Eigen::VectorXcd base = diag ? prop->to_coords(st.psi) : st.psi;
    double t_base = t_grid.front();

    // base is left unnormalized between jumps, so its squared norm is the
    // survival probability accumulated since the last normalization point.
    const auto probe = [&](double dt) {
        if (diag) {
            Eigen::VectorXcd c = base;
            prop->advance_coords(dt, c);
            return prop->norm2_coords(c);
        }
        return prop->apply(dt, base).squaredNorm();
    };
    const auto state_at = [&](double dt) {
        if (diag) {
            Eigen::VectorXcd c = base;
            prop->advance_coords(dt, c);
            return prop->from_coords(c);
        }
        return prop->apply(dt, base);
    };
    const auto rebase = [&](const Eigen::VectorXcd& psi, double t) {
        prop = &eng.propagator(st.current_N);
        diag = prop->diagonalized();
        base = diag ? prop->to_coords(psi) : psi;
        t_base = t;
    };
    const auto draw = [&]() {
        double r = rng.uniform();
        while (r == 0.0) r = rng.uniform();
        return r;
    };

    if (record) record(0, st);
    double r = draw();
    for (int g = 1; g < static_cast<int>(t_grid.size()); ++g) {
        const double tt = t_grid[g];
        for (;;) {
            const double s_end = probe(tt - t_base);
            if (s_end > r) {
                if (diag) prop->advance_coords(tt - t_base, base);
                else base = prop->apply(tt - t_base, base);
                t_base = tt;
                break;
            }
            // Crossing in (t_base, tt]. Bisect with a log-space secant
            // guess, exact for a single-exponential survival.
            double lo = 0.0, s_lo = probe(0.0);
            double hi = tt - t_base, s_hi = s_end;
            double dt_j = hi, s_j = s_end;
            int it = 0;
            while (std::abs(s_j - r) > jump_tol) {
                if (++it > 200) throw NumericError("run_trajectory: jump-time location failed");
                double guess = 0.5 * (lo + hi);
                if (s_hi > 0.0 && s_lo > s_hi) {
                    const double sec =
                        lo + (hi - lo) * std::log(s_lo / r) / std::log(s_lo / s_hi);
                    if (sec > lo && sec < hi) guess = sec;
                }
                s_j = probe(guess);
                dt_j = guess;
                if (s_j > r) {
                    lo = guess;
                    s_lo = s_j;
                } else {
                    hi = guess;
                    s_hi = s_j;
                }
            }
            Eigen::VectorXcd pre = state_at(dt_j);
            pre.normalize();
            // A crossing with no open channel is rounding noise on a
            // conserved norm; treat it as no jump.
            if (!(eng.channel_rates(st.current_N, pre).sum() > 0.0)) {
                if (diag) prop->advance_coords(tt - t_base, base);
                else base = prop->apply(tt - t_base, base);
                t_base = tt;
                break;
            }
            const double tj = t_base + dt_j;
            const int c = eng.sample_jump(st.current_N, pre, rng);
            st.psi = pre;
            eng.apply_jump(st, c, tj);
            rebase(st.psi, tj);
            r = draw();
        }
        Eigen::VectorXcd cur = diag ? prop->from_coords(base) : base;
        cur.normalize();
        st.psi = cur;
        if (record) record(g, st);
    }
}

EnsembleResult run_ensemble(const TrajectoryEngine& eng, const TrajectoryState& init,
                            const std::vector<double>& t_grid, int n_obs,
                            const std::function<Eigen::VectorXd(const TrajectoryState&)>& row,
                            const EnsembleOptions& opt) {
    if (opt.n_traj < 1) throw std::invalid_argument("run_ensemble: n_traj must be positive");
    if (t_grid.empty()) throw std::invalid_argument("run_ensemble: empty time grid");
    if (n_obs < 0 || (n_obs > 0 && !row))
        throw std::invalid_argument("run_ensemble: missing row function");
    if (opt.postselect_N) eng.sector_index(*opt.postselect_N);

    const int n_t = static_cast<int>(t_grid.size());
    constexpr int chunk = 64;
    const int n_chunks = (opt.n_traj + chunk - 1) / chunk;

    struct Partial {
        std::vector<long long> count;
        Eigen::MatrixXd sum, sumsq;
    };
    std::vector<Partial> parts(n_chunks);
    std::vector<std::vector<JumpEvent>> logs;
    if (opt.collect_jumps) logs.resize(opt.n_traj);

    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::mutex err_mutex;
    std::exception_ptr error;

    const auto work = [&]() {
        try {
            for (;;) {
                const int ci = next.fetch_add(1);
                if (ci >= n_chunks || failed.load()) return;
                Partial& part = parts[ci];
                part.count.assign(n_t, 0);
                part.sum = Eigen::MatrixXd::Zero(n_t, n_obs);
                part.sumsq = Eigen::MatrixXd::Zero(n_t, n_obs);
                const int je = std::min(opt.n_traj, (ci + 1) * chunk);
                for (int j = ci * chunk; j < je; ++j) {
                    Philox rng(opt.seed, static_cast<std::uint64_t>(j));
                    TrajectoryState st = init;
                    run_trajectory(
                        eng, st, t_grid, rng,
                        [&](int g, const TrajectoryState& s) {
                            if (opt.postselect_N && s.current_N != *opt.postselect_N) return;
                            part.count[g] += 1;
                            if (n_obs == 0) return;
                            const Eigen::VectorXd v = row(s);
                            if (v.size() != n_obs)
                                throw std::invalid_argument("run_ensemble: row size mismatch");
                            part.sum.row(g) += v.transpose();
                            part.sumsq.row(g) += v.array().square().matrix().transpose();
                        },
                        opt.jump_tol);
                    if (opt.collect_jumps) logs[j] = std::move(st.jump_log);
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lk(err_mutex);
            if (!error) error = std::current_exception();
            failed.store(true);
        }
    };

    int n_threads = opt.threads > 0
                        ? opt.threads
                        : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    n_threads = std::min(n_threads, n_chunks);
    if (n_threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    EnsembleResult res;
    res.t = t_grid;
    res.n_traj = opt.n_traj;
    res.seed = opt.seed;
    res.contributors.assign(n_t, 0);
    res.surviving_fraction.assign(n_t, 0.0);
    res.jump_logs = std::move(logs);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    res.mean = Eigen::MatrixXd::Constant(n_t, n_obs, nan);
    res.std_error = Eigen::MatrixXd::Constant(n_t, n_obs, nan);

    std::vector<long long> count(n_t, 0);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n_t, n_obs);
    Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(n_t, n_obs);
    for (const auto& part : parts) {
        for (int g = 0; g < n_t; ++g) count[g] += part.count[g];
        sum += part.sum;
        sumsq += part.sumsq;
    }
    for (int g = 0; g < n_t; ++g) {
        res.contributors[g] = static_cast<int>(count[g]);
        res.surviving_fraction[g] = static_cast<double>(count[g]) / opt.n_traj;
        if (count[g] < 1 || n_obs == 0) continue;
        const double c = static_cast<double>(count[g]);
        res.mean.row(g) = sum.row(g) / c;
        if (count[g] < 2) continue;
        for (int o = 0; o < n_obs; ++o) {
            const double var =
                std::max(0.0, (sumsq(g, o) - c * res.mean(g, o) * res.mean(g, o)) / (c - 1.0));
            res.std_error(g, o) = std::sqrt(var / c);
        }
    }
    return res;
}

}  // namespace bhc
