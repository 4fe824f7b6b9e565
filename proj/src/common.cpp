#include "scs/common.hpp"

#include <cstdlib>
#include <thread>

namespace scs {

SymInverse guarded_inverse(const Eigen::MatrixXd& m, double max_cond) {
  SymInverse out;
  if (m.rows() == 0) {
    out.inv.resize(0, 0);
    out.cond = 1.0;
    out.ok = true;
    return out;
  }
  if (!m.allFinite()) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) return out;
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double emax = ev.cwiseAbs().maxCoeff();
  const double emin = ev.cwiseAbs().minCoeff();
  if (!(emax > 0) || emin <= 0.0 * emax) {
    // fall through to the condition check; emin == 0 -> cond = inf
  }
  out.cond = (emin > 0) ? emax / emin : std::numeric_limits<double>::infinity();
  if (!(out.cond < max_cond)) return out;
  out.inv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
            es.eigenvectors().transpose();
  out.ok = true;
  return out;
}

std::vector<int> active_set(const Eigen::VectorXd& coef, double eps) {
  std::vector<int> idx;
  for (int j = 0; j < coef.size(); ++j)
    if (std::abs(coef[j]) > eps) idx.push_back(j);
  return idx;
}

Eigen::VectorXd sign_on_active(const Eigen::VectorXd& coef,
                               const std::vector<int>& active) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(coef.size());
  for (int j : active) s[j] = coef[j] > 0 ? 1.0 : -1.0;
  return s;
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
  const int k = static_cast<int>(idx.size());
  Eigen::MatrixXd out(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) out(a, b) = m(idx[a], idx[b]);
  return out;
}

Eigen::VectorXd subvector(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(static_cast<int>(idx.size()));
  for (int a = 0; a < static_cast<int>(idx.size()); ++a) out[a] = v[idx[a]];
  return out;
}

namespace {
// splitmix64 step; the standard seeding mixer.
std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t replicate) {
  // Mix (seed, replicate) into a full 312-word seed sequence so that nearby
  // replicate indices give unrelated streams.
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (replicate + 1));
  std::seed_seq seq{static_cast<unsigned>(splitmix64(s) >> 32),
                    static_cast<unsigned>(splitmix64(s)),
                    static_cast<unsigned>(splitmix64(s) >> 32),
                    static_cast<unsigned>(splitmix64(s))};
  return std::mt19937_64(seq);
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

int worker_count() {
  if (const char* env = std::getenv("SCS_THREADS")) {
    const int k = std::atoi(env);
    if (k >= 1) return k;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

}  // namespace scs
