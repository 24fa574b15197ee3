#include "msflow/partition.hpp"

#include <cmath>
#include <sstream>

#include "msflow/errors.hpp"

namespace msflow {

std::string describe(const SlackModel& slack) {
    std::ostringstream os;
    if (const auto* s = std::get_if<SingleSlack>(&slack)) {
        os << "single:" << s->bus;
    } else {
        const auto& d = std::get<DistributedSlack>(slack);
        os << "distributed:";
        bool first = true;
        for (const auto& [bus, a] : d.alpha) {
            os << (first ? "" : ",") << bus << ":" << a;
            first = false;
        }
        os << ";ref=" << d.angle_ref;
    }
    return os.str();
}

Partition::Partition(const PerUnitNetwork& net, const SlackModel& slack)
    : n_(net.size()), model_(slack), alpha_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.size()))) {
    v_fixed_.resize(n_);
    ids_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) {
        v_fixed_[k] = net.buses[k].kind != BusKind::PQ;
        ids_[k] = net.buses[k].id;
    }

    if (const auto* s = std::get_if<SingleSlack>(&slack)) {
        std::size_t b;
        try {
            b = net.index_of(s->bus);
        } catch (const Error&) {
            throw Error(ErrorCode::InvalidSlack, "slack bus " + std::to_string(s->bus) + " not in case");
        }
        slack_bus_ = b;
        angle_ref_ = b;
        // the slack bus holds its magnitude whatever its kind in the case
        v_fixed_[b] = true;
        alpha_(static_cast<Eigen::Index>(b)) = 1.0;
    } else {
        const auto& d = std::get<DistributedSlack>(slack);
        if (d.alpha.empty()) throw Error(ErrorCode::InvalidSlack, "empty participation vector");
        double sum = 0.0;
        for (const auto& [bus, a] : d.alpha) {
            std::size_t k;
            try {
                k = net.index_of(bus);
            } catch (const Error&) {
                throw Error(ErrorCode::InvalidSlack, "participation bus " + std::to_string(bus) + " not in case");
            }
            if (!std::isfinite(a)) throw Error(ErrorCode::InvalidSlack, "non-finite participation factor");
            if (d.require_nonnegative && a < 0.0)
                throw Error(ErrorCode::InvalidSlack, "negative participation factor at bus " + std::to_string(bus));
            alpha_(static_cast<Eigen::Index>(k)) = a;
            sum += a;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw Error(ErrorCode::InvalidSlack, "participation factors must sum to 1");
        try {
            angle_ref_ = net.index_of(d.angle_ref);
        } catch (const Error&) {
            throw Error(ErrorCode::InvalidSlack, "angle reference bus " + std::to_string(d.angle_ref) + " not in case");
        }
        if (!v_fixed_[angle_ref_])
            throw Error(ErrorCode::InvalidSlack, "angle reference bus must hold its voltage (PV or VD)");
    }

    const auto ni = static_cast<Eigen::Index>(n_);
    for (std::size_t k = 0; k < n_; ++k) {
        if (k == angle_ref_) continue;
        unknowns_.push_back({Quantity::Angle, k});
        jf_cols_.push_back(static_cast<Eigen::Index>(k));
    }
    for (std::size_t k = 0; k < n_; ++k) {
        if (v_fixed_[k]) continue;
        unknowns_.push_back({Quantity::Magnitude, k});
        jf_cols_.push_back(ni + static_cast<Eigen::Index>(k));
    }
    if (distributed()) {
        unknowns_.push_back({Quantity::SlackPower, 0});
        jf_cols_.push_back(-1);
    }

    p_row_.assign(n_, -1);
    q_row_.assign(n_, -1);
    for (std::size_t k = 0; k < n_; ++k) {
        if (slack_bus_ && k == *slack_bus_) continue;
        p_row_[k] = static_cast<Eigen::Index>(equations_.size());
        equations_.push_back({Balance::Active, k});
        jf_rows_.push_back(static_cast<Eigen::Index>(k));
    }
    for (std::size_t k = 0; k < n_; ++k) {
        if (v_fixed_[k]) continue;
        q_row_[k] = static_cast<Eigen::Index>(equations_.size());
        equations_.push_back({Balance::Reactive, k});
        jf_rows_.push_back(ni + static_cast<Eigen::Index>(k));
    }
}

std::size_t Partition::slack_bus() const {
    if (!slack_bus_) throw Error(ErrorCode::InvalidSlack, "distributed slack has no single slack bus");
    return *slack_bus_;
}

std::optional<Eigen::Index> Partition::p_row(std::size_t bus) const {
    if (p_row_[bus] < 0) return std::nullopt;
    return p_row_[bus];
}

std::optional<Eigen::Index> Partition::q_row(std::size_t bus) const {
    if (q_row_[bus] < 0) return std::nullopt;
    return q_row_[bus];
}

Eigen::VectorXd Partition::pack(const Eigen::VectorXd& delta, const Eigen::VectorXd& v,
                                double slack_power) const {
    if (delta.size() != static_cast<Eigen::Index>(n_) || v.size() != static_cast<Eigen::Index>(n_))
        throw Error(ErrorCode::DimensionMismatch, "state size does not match partition");
    Eigen::VectorXd x(static_cast<Eigen::Index>(unknowns_.size()));
    for (std::size_t i = 0; i < unknowns_.size(); ++i) {
        const auto& u = unknowns_[i];
        const auto b = static_cast<Eigen::Index>(u.bus);
        switch (u.quantity) {
        case Quantity::Angle: x(static_cast<Eigen::Index>(i)) = delta(b); break;
        case Quantity::Magnitude: x(static_cast<Eigen::Index>(i)) = v(b); break;
        case Quantity::SlackPower: x(static_cast<Eigen::Index>(i)) = slack_power; break;
        }
    }
    return x;
}

void Partition::unpack(const Eigen::VectorXd& x, Eigen::VectorXd& delta, Eigen::VectorXd& v,
                       double& slack_power) const {
    if (x.size() != static_cast<Eigen::Index>(unknowns_.size()))
        throw Error(ErrorCode::DimensionMismatch, "unknown vector size does not match partition");
    for (std::size_t i = 0; i < unknowns_.size(); ++i) {
        const auto& u = unknowns_[i];
        const auto b = static_cast<Eigen::Index>(u.bus);
        switch (u.quantity) {
        case Quantity::Angle: delta(b) = x(static_cast<Eigen::Index>(i)); break;
        case Quantity::Magnitude: v(b) = x(static_cast<Eigen::Index>(i)); break;
        case Quantity::SlackPower: slack_power = x(static_cast<Eigen::Index>(i)); break;
        }
    }
}

Injections Injections::from_network(const PerUnitNetwork& net) {
    Injections inj;
    const auto n = static_cast<Eigen::Index>(net.size());
    inj.p.resize(n);
    inj.q.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        inj.p(k) = net.buses[static_cast<std::size_t>(k)].p;
        inj.q(k) = net.buses[static_cast<std::size_t>(k)].q;
    }
    return inj;
}

}  // namespace msflow
