#include "latticeopt/mma.hpp"

#include "latticeopt/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace latticeopt {

std::pair<Eigen::VectorXd, Eigen::VectorXd> apply_move_limits(const Eigen::VectorXd& z,
                                                              double m) {
  return {(z.array() - m).max(0.0).matrix(), (z.array() + m).min(1.0).matrix()};
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Subproblem {
  int n, m;
  VectorXd low, upp, alfa, beta, p0, q0;
  MatrixXd P, Q;
  double a0;
  VectorXd a, b, c, d;
  // Largest objective and constraint derivative, for a residual scale.
  double df_max = 0.0, dg_max = 0.0;
};

struct Point {
  VectorXd x, y;
  double z;
  VectorXd lam, xsi, eta, mu;
  double zet;
  VectorXd s;
};

// KKT residual of the perturbed subproblem at barrier parameter epsi.
VectorXd kkt_residual(const Subproblem& sp, const Point& pt, double epsi) {
  const int n = sp.n, m = sp.m;
  const VectorXd ux1 = sp.upp - pt.x, xl1 = pt.x - sp.low;
  const VectorXd plam = sp.p0 + sp.P.transpose() * pt.lam;
  const VectorXd qlam = sp.q0 + sp.Q.transpose() * pt.lam;
  const VectorXd gvec = sp.P * ux1.cwiseInverse() + sp.Q * xl1.cwiseInverse();
  const VectorXd dpsidx =
      plam.cwiseQuotient(ux1.cwiseAbs2()) - qlam.cwiseQuotient(xl1.cwiseAbs2());

  VectorXd r(3 * n + 4 * m + 2);
  int o = 0;
  r.segment(o, n) = dpsidx - pt.xsi + pt.eta;
  o += n;
  r.segment(o, m) = sp.c + sp.d.cwiseProduct(pt.y) - pt.mu - pt.lam;
  o += m;
  r[o++] = sp.a0 - pt.zet - sp.a.dot(pt.lam);
  r.segment(o, m) = gvec - sp.a * pt.z - pt.y + pt.s - sp.b;
  o += m;
  r.segment(o, n) = (pt.xsi.array() * (pt.x - sp.alfa).array() - epsi).matrix();
  o += n;
  r.segment(o, n) = (pt.eta.array() * (sp.beta - pt.x).array() - epsi).matrix();
  o += n;
  r.segment(o, m) = (pt.mu.array() * pt.y.array() - epsi).matrix();
  o += m;
  r[o++] = pt.zet * pt.z - epsi;
  r.segment(o, m) = (pt.lam.array() * pt.s.array() - epsi).matrix();
  return r;
}

// Primal-dual Newton method on the convex MMA subproblem.
Point subsolve(const Subproblem& sp, double epsimin, double& last_residual) {
  const int n = sp.n, m = sp.m;
  const VectorXd een = VectorXd::Ones(n), eem = VectorXd::Ones(m);

  Point pt;
  pt.x = 0.5 * (sp.alfa + sp.beta);
  pt.y = eem;
  pt.z = 1.0;
  pt.lam = eem;
  pt.xsi = (pt.x - sp.alfa).cwiseInverse().cwiseMax(1.0);
  pt.eta = (sp.beta - pt.x).cwiseInverse().cwiseMax(1.0);
  pt.mu = (0.5 * sp.c).cwiseMax(1.0);
  pt.zet = 1.0;
  pt.s = eem;

  double epsi = 1.0;
  while (epsi > epsimin) {
    VectorXd res = kkt_residual(sp, pt, epsi);
    double resnorm = res.norm();
    double resmax = res.cwiseAbs().maxCoeff();
    int inner = 0;
    while (resmax > 0.9 * epsi && inner < 200) {
      ++inner;
      const VectorXd ux1 = sp.upp - pt.x, xl1 = pt.x - sp.low;
      const VectorXd ux2 = ux1.cwiseAbs2(), xl2 = xl1.cwiseAbs2();
      const VectorXd ux3 = ux1.cwiseProduct(ux2), xl3 = xl1.cwiseProduct(xl2);
      const VectorXd plam = sp.p0 + sp.P.transpose() * pt.lam;
      const VectorXd qlam = sp.q0 + sp.Q.transpose() * pt.lam;
      const VectorXd gvec = sp.P * ux1.cwiseInverse() + sp.Q * xl1.cwiseInverse();
      const MatrixXd GG = sp.P * ux2.cwiseInverse().asDiagonal() -
                          sp.Q * xl2.cwiseInverse().asDiagonal();
      const VectorXd dpsidx = plam.cwiseQuotient(ux2) - qlam.cwiseQuotient(xl2);
      const VectorXd xa = pt.x - sp.alfa, bx = sp.beta - pt.x;

      const VectorXd delx = dpsidx - epsi * xa.cwiseInverse() + epsi * bx.cwiseInverse();
      const VectorXd dely = sp.c + sp.d.cwiseProduct(pt.y) - pt.lam - epsi * pt.y.cwiseInverse();
      const double delz = sp.a0 - sp.a.dot(pt.lam) - epsi / pt.z;
      const VectorXd dellam = gvec - sp.a * pt.z - pt.y - sp.b + epsi * pt.lam.cwiseInverse();
      const VectorXd diagx = 2.0 * (plam.cwiseQuotient(ux3) + qlam.cwiseQuotient(xl3)) +
                             pt.xsi.cwiseQuotient(xa) + pt.eta.cwiseQuotient(bx);
      const VectorXd diagy = sp.d + pt.mu.cwiseQuotient(pt.y);
      const VectorXd diaglamyi = pt.s.cwiseQuotient(pt.lam) + diagy.cwiseInverse();

      VectorXd dx, dlam;
      double dz;
      if (m < n) {
        const VectorXd blam = dellam + dely.cwiseQuotient(diagy) -
                              GG * delx.cwiseQuotient(diagx);
        MatrixXd aa(m + 1, m + 1);
        aa.topLeftCorner(m, m) = GG * diagx.cwiseInverse().asDiagonal() * GG.transpose();
        aa.topLeftCorner(m, m).diagonal() += diaglamyi;
        aa.topRightCorner(m, 1) = sp.a;
        aa.bottomLeftCorner(1, m) = sp.a.transpose();
        aa(m, m) = -pt.zet / pt.z;
        VectorXd bb(m + 1);
        bb << blam, delz;
        const VectorXd sol = aa.partialPivLu().solve(bb);
        dlam = sol.head(m);
        dz = sol[m];
        dx = -delx.cwiseQuotient(diagx) - (GG.transpose() * dlam).cwiseQuotient(diagx);
      } else {
        const VectorXd inv = diaglamyi.cwiseInverse();
        const VectorXd dellamyi = dellam + dely.cwiseQuotient(diagy);
        MatrixXd aa(n + 1, n + 1);
        aa.topLeftCorner(n, n) = GG.transpose() * inv.asDiagonal() * GG;
        aa.topLeftCorner(n, n).diagonal() += diagx;
        const VectorXd axz = -GG.transpose() * sp.a.cwiseProduct(inv);
        aa.topRightCorner(n, 1) = axz;
        aa.bottomLeftCorner(1, n) = axz.transpose();
        aa(n, n) = pt.zet / pt.z + sp.a.dot(sp.a.cwiseProduct(inv));
        VectorXd bb(n + 1);
        bb << -(delx + GG.transpose() * dellamyi.cwiseProduct(inv)),
            -(delz - sp.a.dot(dellamyi.cwiseProduct(inv)));
        const VectorXd sol = aa.partialPivLu().solve(bb);
        dx = sol.head(n);
        dz = sol[n];
        dlam = (GG * dx).cwiseProduct(inv) - dz * sp.a.cwiseProduct(inv) +
               dellamyi.cwiseProduct(inv);
      }
      const VectorXd dy = -dely.cwiseQuotient(diagy) + dlam.cwiseQuotient(diagy);
      const VectorXd dxsi = -pt.xsi + epsi * xa.cwiseInverse() -
                            pt.xsi.cwiseProduct(dx).cwiseQuotient(xa);
      const VectorXd deta = -pt.eta + epsi * bx.cwiseInverse() +
                            pt.eta.cwiseProduct(dx).cwiseQuotient(bx);
      const VectorXd dmu = -pt.mu + epsi * pt.y.cwiseInverse() -
                           pt.mu.cwiseProduct(dy).cwiseQuotient(pt.y);
      const double dzet = -pt.zet + epsi / pt.z - pt.zet * dz / pt.z;
      const VectorXd ds = -pt.s + epsi * pt.lam.cwiseInverse() -
                          pt.s.cwiseProduct(dlam).cwiseQuotient(pt.lam);

      // Largest step keeping all slack-type variables positive.
      double stm = 1.0;
      auto limit = [&stm](const VectorXd& v, const VectorXd& dv) {
        for (int i = 0; i < v.size(); ++i) {
          stm = std::max(stm, -1.01 * dv[i] / v[i]);
        }
      };
      limit(pt.y, dy);
      limit(pt.lam, dlam);
      limit(pt.xsi, dxsi);
      limit(pt.eta, deta);
      limit(pt.mu, dmu);
      limit(pt.s, ds);
      stm = std::max({stm, -1.01 * dz / pt.z, -1.01 * dzet / pt.zet});
      for (int i = 0; i < n; ++i) {
        stm = std::max({stm, -1.01 * dx[i] / xa[i], 1.01 * dx[i] / bx[i]});
      }
      double step = 1.0 / stm;

      const Point old = pt;
      double resnew = 2.0 * resnorm;
      int halvings = 0;
      while (resnew > resnorm && halvings < 50) {
        ++halvings;
        pt.x = old.x + step * dx;
        pt.y = old.y + step * dy;
        pt.z = old.z + step * dz;
        pt.lam = old.lam + step * dlam;
        pt.xsi = old.xsi + step * dxsi;
        pt.eta = old.eta + step * deta;
        pt.mu = old.mu + step * dmu;
        pt.zet = old.zet + step * dzet;
        pt.s = old.s + step * ds;
        res = kkt_residual(sp, pt, epsi);
        resnew = res.norm();
        step /= 2.0;
      }
      resnorm = resnew;
      resmax = res.cwiseAbs().maxCoeff();
    }
    // The Newton loop can stall above the barrier target: along flat
    // directions near 1e-6, and when iterates sit within ~1e-5 of their
    // asymptotes, where the subproblem is so curved that damped steps trade
    // complementarity for primal residual. Like the reference algorithm we
    // keep the last interior point, which still lies in [alfa, beta], and let
    // the outer iteration correct it. The residual is reported relative to
    // the stationarity rows, which carry df0 + lam' dg.
    const double lam_max = sp.m > 0 ? pt.lam.cwiseAbs().maxCoeff() : 0.0;
    const double scale = 1.0 + sp.df_max + lam_max * sp.dg_max;
    last_residual = resmax / scale;
    if (!std::isfinite(resmax) || !pt.x.allFinite()) {
      std::ostringstream msg;
      msg << "MMA subproblem diverged: max KKT residual " << resmax
          << " at barrier parameter " << epsi;
      throw SolverError(msg.str(), resmax);
    }
    epsi *= 0.1;
  }
  return pt;
}

}  // namespace

Mma::Mma(int n, int m, MmaOptions options) : n_(n), m_(m), opt_(options) {}

Eigen::VectorXd Mma::update(const Eigen::VectorXd& x, const Eigen::VectorXd& df0,
                            const Eigen::VectorXd& g, const Eigen::MatrixXd& dg,
                            const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  const int n = n_, m = m_;
  if (x.size() != n || df0.size() != n || g.size() != m || dg.rows() != m ||
      dg.cols() != n || lower.size() != n || upper.size() != n) {
    throw std::invalid_argument("MMA update: inconsistent dimensions");
  }
  if (!df0.allFinite() || !g.allFinite() || !dg.allFinite()) {
    throw SolverError("MMA update: non-finite objective or constraint data", NAN);
  }
  ++iter_;

  // Asymptotes on the global box [0, 1].
  const double range = 1.0;
  if (iter_ <= 2) {
    low_ = x.array() - opt_.asyinit * range;
    upp_ = x.array() + opt_.asyinit * range;
  } else {
    for (int j = 0; j < n; ++j) {
      const double zzz = (x[j] - xold1_[j]) * (xold1_[j] - xold2_[j]);
      const double factor = zzz > 0 ? opt_.asyincr : (zzz < 0 ? opt_.asydecr : 1.0);
      low_[j] = x[j] - factor * (xold1_[j] - low_[j]);
      upp_[j] = x[j] + factor * (upp_[j] - xold1_[j]);
      low_[j] = std::clamp(low_[j], x[j] - 100.0 * range, x[j] - 1e-5 * range);
      upp_[j] = std::clamp(upp_[j], x[j] + 1e-5 * range, x[j] + 100.0 * range);
    }
  }

  Subproblem sp;
  sp.n = n;
  sp.m = m;
  sp.low = low_;
  sp.upp = upp_;
  sp.alfa = (low_ + opt_.albefa * (x - low_)).cwiseMax(lower).cwiseMax(0.0);
  sp.beta = (upp_ - opt_.albefa * (upp_ - x)).cwiseMin(upper).cwiseMin(1.0);
  for (int j = 0; j < n; ++j) {
    if (!(sp.alfa[j] < sp.beta[j])) {
      // A fixed variable: open a sliver so the interior point method has room.
      const double mid = std::clamp(x[j], 0.0, 1.0);
      sp.alfa[j] = std::max(mid - 1e-12, low_[j] + 1e-12);
      sp.beta[j] = std::min(mid + 1e-12, upp_[j] - 1e-12);
    }
  }

  const double xmamiinv = 1.0 / range;
  const Eigen::ArrayXd ux2 = (upp_ - x).array().square();
  const Eigen::ArrayXd xl2 = (x - low_).array().square();

  const Eigen::ArrayXd p0 = df0.array().max(0.0), q0 = (-df0.array()).max(0.0);
  const Eigen::ArrayXd pq0 = 0.001 * (p0 + q0) + opt_.raa0 * xmamiinv;
  sp.p0 = ((p0 + pq0) * ux2).matrix();
  sp.q0 = ((q0 + pq0) * xl2).matrix();

  sp.P = dg.cwiseMax(0.0);
  sp.Q = (-dg).cwiseMax(0.0);
  const MatrixXd pq = 0.001 * (sp.P + sp.Q).array() + opt_.raa0 * xmamiinv;
  sp.P += pq;
  sp.Q += pq;
  sp.P = sp.P * ux2.matrix().asDiagonal();
  sp.Q = sp.Q * xl2.matrix().asDiagonal();
  sp.b = sp.P * (upp_ - x).cwiseInverse() + sp.Q * (x - low_).cwiseInverse() - g;

  sp.df_max = df0.cwiseAbs().maxCoeff();
  sp.dg_max = m > 0 ? dg.cwiseAbs().maxCoeff() : 0.0;
  sp.a0 = opt_.a0;
  sp.a = VectorXd::Zero(m);
  sp.c = VectorXd::Constant(m, opt_.c);
  sp.d = VectorXd::Constant(m, opt_.d);

  const Point pt = subsolve(sp, opt_.epsimin, residual_);
  xold2_ = iter_ >= 2 ? xold1_ : x;
  xold1_ = x;
  lam_ = pt.lam;
  return pt.x;
}

}  // namespace latticeopt
