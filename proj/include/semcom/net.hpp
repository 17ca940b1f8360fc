#pragma once

#include <cstdint>
#include <vector>

#include "semcom/rng.hpp"

namespace semcom {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

double distance(const Point& a, const Point& b);

/// Physical-layer constants; all values carry explicit SI units.
struct PhyParams {
    double tx_power_w = 1.0;
    double rb_bandwidth_hz = 2e6;
    double noise_psd_w_per_hz = 3.981071705534986e-21; // -174 dBm/Hz
    int bits_per_letter = 8;
    double min_distance_m = 1.0; // path-loss floor
};

double dbm_per_hz_to_w_per_hz(double dbm_per_hz);

struct GeometryParams {
    int num_servers = 5;
    int num_users = 50;
    double server_ring_radius_m = 200.0;
    double area_radius_m = 500.0;
    double coverage_radius_m = 300.0;
};

/// Server/user geometry with per-server coverage sets. Coverage areas may
/// overlap; a user can sit in several sets or in none.
struct Topology {
    std::vector<Point> servers;
    std::vector<Point> users;
    double coverage_radius_m = 0.0;
    std::vector<std::vector<int>> coverage; // per server, user indices in range

    bool covers(int server, int user) const;
};

/// Servers evenly spaced on a ring about the origin, users uniform in a disk.
Topology gen_topology(const GeometryParams& geom, rng::Stream& stream);

/// Per-(server, user, RB) fading draws and the induced channel gains.
struct ChannelRealization {
    int num_servers = 0;
    int num_users = 0;
    int num_rbs = 0;
    std::vector<double> fading; // gamma, unit-mean exponential
    std::vector<double> gain;   // gamma * d^-2 with d floored at min_distance

    double& fading_at(int v, int k, int q) { return fading[idx(v, k, q)]; }
    double fading_at(int v, int k, int q) const { return fading[idx(v, k, q)]; }
    double& gain_at(int v, int k, int q) { return gain[idx(v, k, q)]; }
    double gain_at(int v, int k, int q) const { return gain[idx(v, k, q)]; }

    std::size_t idx(int v, int k, int q) const {
        return (static_cast<std::size_t>(v) * num_users + k) * num_rbs + q;
    }
};

/// i.i.d. unit-mean exponential fading (Rayleigh envelope power).
ChannelRealization sample_channels(const Topology& topo, int num_rbs, double min_distance_m,
                                   rng::Stream& stream);

/// Recompute gains for given geometry (used after loading fading from file).
void derive_gains(ChannelRealization& ch, const Topology& topo, double min_distance_m);

/// Binary server x user x RB assignment. Per-server constraints (one user per
/// RB, one RB per user, coverage only) are enforced; several servers may still
/// target the same user, which the environment penalizes rather than forbids.
struct JointAllocation {
    int num_servers = 0;
    int num_users = 0;
    int num_rbs = 0;
    std::vector<std::uint8_t> assign;

    JointAllocation() = default;
    JointAllocation(int V, int U, int Q)
        : num_servers(V), num_users(U), num_rbs(Q),
          assign(static_cast<std::size_t>(V) * U * Q, 0) {}

    bool get(int v, int k, int q) const {
        return assign[(static_cast<std::size_t>(v) * num_users + k) * num_rbs + q] != 0;
    }
    void set(int v, int k, int q, bool on) {
        assign[(static_cast<std::size_t>(v) * num_users + k) * num_rbs + q] = on ? 1 : 0;
    }

    /// True when a server other than `v` occupies RB `q`.
    bool rb_used_by_other(int v, int q) const;
};

/// Throws std::invalid_argument when a per-server constraint or the coverage
/// constraint is violated.
void check_allocation(const JointAllocation& alloc, const Topology& topo);

/// Single-RB downlink rate of server v to user k on RB q, bit/s. Interference
/// comes from every other server occupying RB q in `alloc`.
double rate_single_rb(const JointAllocation& alloc, const ChannelRealization& ch,
                      const PhyParams& phy, int v, int k, int q);

/// Total downlink rate of user k over all assigned (server, RB) pairs, bit/s;
/// 0 for an unserved user.
double rate(const JointAllocation& alloc, const ChannelRealization& ch, const PhyParams& phy,
            int k);

/// Transmission seconds for `letters` letters at `rate_bps`. Throws
/// RuntimeFailure on a nonpositive rate; callers must not ask for the latency
/// of an unserved user.
double latency_seconds(long letters, double rate_bps, int bits_per_letter);

}  // namespace semcom
