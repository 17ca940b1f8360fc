#include "semcom/net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "semcom/errors.hpp"

namespace semcom {

double distance(const Point& a, const Point& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

double dbm_per_hz_to_w_per_hz(double dbm_per_hz) {
    return std::pow(10.0, (dbm_per_hz - 30.0) / 10.0);
}

bool Topology::covers(int server, int user) const {
    for (int u : coverage[server])
        if (u == user) return true;
    return false;
}

Topology gen_topology(const GeometryParams& geom, rng::Stream& stream) {
    if (geom.num_servers < 1 || geom.num_users < 1)
        throw ConfigError("topology: need at least one server and one user");
    if (geom.coverage_radius_m <= 0.0) throw ConfigError("topology: coverage_radius_m must be > 0");
    if (geom.server_ring_radius_m < 0.0 || geom.area_radius_m <= 0.0)
        throw ConfigError("topology: radii must be nonnegative (area > 0)");

    Topology topo;
    topo.coverage_radius_m = geom.coverage_radius_m;
    topo.servers.reserve(geom.num_servers);
    for (int v = 0; v < geom.num_servers; ++v) {
        const double angle = 2.0 * M_PI * v / geom.num_servers;
        topo.servers.push_back(
            {geom.server_ring_radius_m * std::cos(angle), geom.server_ring_radius_m * std::sin(angle)});
    }
    topo.users.reserve(geom.num_users);
    for (int k = 0; k < geom.num_users; ++k) {
        const double r = geom.area_radius_m * std::sqrt(stream.uniform());
        const double angle = 2.0 * M_PI * stream.uniform();
        topo.users.push_back({r * std::cos(angle), r * std::sin(angle)});
    }
    topo.coverage.resize(geom.num_servers);
    for (int v = 0; v < geom.num_servers; ++v)
        for (int k = 0; k < geom.num_users; ++k)
            if (distance(topo.servers[v], topo.users[k]) <= geom.coverage_radius_m)
                topo.coverage[v].push_back(k);
    return topo;
}

ChannelRealization sample_channels(const Topology& topo, int num_rbs, double min_distance_m,
                                   rng::Stream& stream) {
    ChannelRealization ch;
    ch.num_servers = static_cast<int>(topo.servers.size());
    ch.num_users = static_cast<int>(topo.users.size());
    ch.num_rbs = num_rbs;
    ch.fading.resize(static_cast<std::size_t>(ch.num_servers) * ch.num_users * num_rbs);
    for (double& g : ch.fading) g = stream.exponential();
    derive_gains(ch, topo, min_distance_m);
    return ch;
}

void derive_gains(ChannelRealization& ch, const Topology& topo, double min_distance_m) {
    ch.gain.resize(ch.fading.size());
    for (int v = 0; v < ch.num_servers; ++v)
        for (int k = 0; k < ch.num_users; ++k) {
            const double d = std::max(distance(topo.servers[v], topo.users[k]), min_distance_m);
            const double path = 1.0 / (d * d);
            for (int q = 0; q < ch.num_rbs; ++q)
                ch.gain[ch.idx(v, k, q)] = ch.fading[ch.idx(v, k, q)] * path;
        }
}

bool JointAllocation::rb_used_by_other(int v, int q) const {
    for (int s = 0; s < num_servers; ++s) {
        if (s == v) continue;
        for (int k = 0; k < num_users; ++k)
            if (get(s, k, q)) return true;
    }
    return false;
}

void check_allocation(const JointAllocation& alloc, const Topology& topo) {
    for (int v = 0; v < alloc.num_servers; ++v) {
        for (int q = 0; q < alloc.num_rbs; ++q) {
            int users_on_rb = 0;
            for (int k = 0; k < alloc.num_users; ++k)
                if (alloc.get(v, k, q)) ++users_on_rb;
            if (users_on_rb > 1)
                throw std::invalid_argument("allocation: server " + std::to_string(v) +
                                            " assigned RB " + std::to_string(q) + " twice");
        }
        for (int k = 0; k < alloc.num_users; ++k) {
            int rbs_for_user = 0;
            for (int q = 0; q < alloc.num_rbs; ++q)
                if (alloc.get(v, k, q)) ++rbs_for_user;
            if (rbs_for_user > 1)
                throw std::invalid_argument("allocation: server " + std::to_string(v) +
                                            " serves user " + std::to_string(k) +
                                            " on multiple RBs");
            if (rbs_for_user > 0 && !topo.covers(v, k))
                throw std::invalid_argument("allocation: server " + std::to_string(v) +
                                            " serves user " + std::to_string(k) +
                                            " outside its coverage");
        }
    }
}

double rate_single_rb(const JointAllocation& alloc, const ChannelRealization& ch,
                      const PhyParams& phy, int v, int k, int q) {
    double interference = 0.0;
    for (int s = 0; s < alloc.num_servers; ++s) {
        if (s == v) continue;
        for (int u = 0; u < alloc.num_users; ++u) {
            if (alloc.get(s, u, q)) {
                interference += phy.tx_power_w * ch.gain_at(s, k, q);
                break;
            }
        }
    }
    const double sinr = phy.tx_power_w * ch.gain_at(v, k, q) /
                        (interference + phy.rb_bandwidth_hz * phy.noise_psd_w_per_hz);
    return phy.rb_bandwidth_hz * std::log2(1.0 + sinr);
}

double rate(const JointAllocation& alloc, const ChannelRealization& ch, const PhyParams& phy,
            int k) {
    double total = 0.0;
    for (int v = 0; v < alloc.num_servers; ++v)
        for (int q = 0; q < alloc.num_rbs; ++q)
            if (alloc.get(v, k, q)) total += rate_single_rb(alloc, ch, phy, v, k, q);
    return total;
}

double latency_seconds(long letters, double rate_bps, int bits_per_letter) {
    if (rate_bps <= 0.0)
        throw RuntimeFailure("latency requested for an unserved user (rate <= 0)");
    return static_cast<double>(bits_per_letter) * static_cast<double>(letters) / rate_bps;
}

}  // namespace semcom
