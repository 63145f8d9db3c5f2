#include "spinchain/model.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "spinchain/linalg.hpp"

namespace spinchain::model {

const char* bc_name(BoundaryCondition bc) {
  return bc == BoundaryCondition::Free ? "free" : "periodic";
}

BoundaryCondition bc_from_name(const std::string& name) {
  if (name == "free") return BoundaryCondition::Free;
  if (name == "periodic") return BoundaryCondition::Periodic;
  throw Error(Errc::InvalidConfig, "bc must be 'free' or 'periodic', got '" + name + "'");
}

SpinChain::SpinChain(int n_dim, int length, BoundaryCondition bc)
    : n_dim_(n_dim), length_(length), bc_(bc),
      data_(static_cast<size_t>(n_dim) * length, 0.0) {
  if (n_dim < 2 || n_dim > kMaxDim) throw Error(Errc::InvalidDimension, "n_dim must be in [2, 8]");
  if (length < 2) throw Error(Errc::InvalidConfig, "length must be >= 2");
}

SpinChain SpinChain::aligned(int n_dim, int length, BoundaryCondition bc) {
  SpinChain c(n_dim, length, bc);
  for (int i = 0; i < length; ++i) c.spin(i)[0] = 1.0;
  return c;
}

SpinChain SpinChain::ring(int length, int winding, BoundaryCondition bc) {
  SpinChain c(2, length, bc);
  for (int j = 0; j < length; ++j) {
    const double x = 2.0 * M_PI * winding * j / length;
    c.spin(j)[0] = std::cos(x);
    c.spin(j)[1] = std::sin(x);
  }
  return c;
}

void SpinChain::set_spin(int i, const Vec& v) {
  if (v.dim() != n_dim_) throw Error(Errc::InvalidDimension, "spin dimension mismatch");
  auto s = spin(i);
  for (int k = 0; k < n_dim_; ++k) s[k] = v[k];
}

double SpinChain::max_unit_violation() const {
  double worst = 0.0;
  for (int i = 0; i < length_; ++i) worst = std::max(worst, std::abs(norm(spin(i)) - 1.0));
  return worst;
}

double energy(const SpinChain& chain) {
  const int L = chain.length();
  const int bonds = chain.bc() == BoundaryCondition::Periodic ? L : L - 1;
  std::vector<double> terms(static_cast<size_t>(bonds));
  for (int i = 0; i < bonds; ++i) {
    const int j = (i + 1) % L;
    terms[static_cast<size_t>(i)] = -dot(chain.spin(i), chain.spin(j));
  }
  return linalg::pairwise_sum(terms.data(), terms.size());
}

geometry::TangentVector grad_energy(const SpinChain& chain, int i) {
  const int n = chain.n_dim();
  Vec m(n);
  const int l = chain.left(i), r = chain.right(i);
  if (l >= 0) m += chain.spin_vec(l);
  if (r >= 0) m += chain.spin_vec(r);
  const Vec si = chain.spin_vec(i);
  // D_i H = (m . S_i) S_i - m
  Vec g = dot(m, si) * si - m;
  return {si, g};
}

double grad_energy_norm_sq(const SpinChain& chain) {
  double s = 0.0;
  for (int i = 0; i < chain.length(); ++i) s += norm_sq(grad_energy(chain, i).direction);
  return s;
}

bool in_arctic(const SpinChain& chain, double threshold) {
  for (int i = 0; i < chain.length(); ++i)
    if (!(chain.spin(i)[0] > threshold)) return false;
  return true;
}

double relative_density_bound(double beta) { return std::exp(beta); }

namespace {

void put_u16(std::ostream& os, uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}
void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}
void put_f64(std::ostream& os, double x) {
  uint64_t v;
  std::memcpy(&v, &x, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}
uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}
uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}
double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  double x;
  std::memcpy(&x, &v, 8);
  return x;
}

constexpr uint16_t kFormatVersion = 1;

}  // namespace

void write_binary(std::ostream& os, const SpinChain& chain) {
  os.write("ONCH", 4);
  put_u16(os, kFormatVersion);
  put_u16(os, static_cast<uint16_t>(chain.n_dim()));
  put_u32(os, static_cast<uint32_t>(chain.length()));
  os.put(static_cast<char>(chain.bc()));
  for (double x : chain.raw()) put_f64(os, x);
}

SpinChain read_binary(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "ONCH", 4) != 0)
    throw Error(Errc::BadRecord, "bad magic in spin chain record");
  const uint16_t version = get_u16(is);
  if (version != kFormatVersion) throw Error(Errc::BadRecord, "unsupported record version");
  const int n = get_u16(is);
  const int L = static_cast<int>(get_u32(is));
  const int bc = is.get();
  if (bc != 0 && bc != 1) throw Error(Errc::BadRecord, "bad boundary tag");
  SpinChain chain(n, L, static_cast<BoundaryCondition>(bc));
  for (double& x : chain.raw()) x = get_f64(is);
  if (!is) throw Error(Errc::BadRecord, "truncated spin chain record");
  return chain;
}

std::string to_json_string(const SpinChain& chain) {
  nlohmann::json j;
  j["format"] = "ONCH";
  j["version"] = kFormatVersion;
  j["n_dim"] = chain.n_dim();
  j["length"] = chain.length();
  j["bc"] = bc_name(chain.bc());
  auto spins = nlohmann::json::array();
  for (int i = 0; i < chain.length(); ++i) {
    auto s = nlohmann::json::array();
    for (double x : chain.spin(i)) s.push_back(x);
    spins.push_back(std::move(s));
  }
  j["spins"] = std::move(spins);
  return j.dump();
}

SpinChain from_json_string(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "ONCH") throw Error(Errc::BadRecord, "bad json record format tag");
  SpinChain chain(j.at("n_dim").get<int>(), j.at("length").get<int>(),
                  bc_from_name(j.at("bc").get<std::string>()));
  const auto& spins = j.at("spins");
  if (static_cast<int>(spins.size()) != chain.length())
    throw Error(Errc::BadRecord, "spin count mismatch");
  for (int i = 0; i < chain.length(); ++i) {
    auto s = chain.spin(i);
    for (int k = 0; k < chain.n_dim(); ++k) s[k] = spins[i][k].get<double>();
  }
  return chain;
}

void dump_samples(std::ostream& os, const std::vector<SpinChain>& chains) {
  for (const auto& c : chains) {
    std::string rec;
    {
      std::ostringstream buf(std::ios::binary);
      write_binary(buf, c);
      rec = buf.str();
    }
    put_u32(os, static_cast<uint32_t>(rec.size()));
    os.write(rec.data(), static_cast<std::streamsize>(rec.size()));
  }
}

std::vector<SpinChain> load_samples(std::istream& is) {
  std::vector<SpinChain> out;
  while (is.peek() != std::char_traits<char>::eof()) {
    const uint32_t len = get_u32(is);
    if (!is) break;
    std::string rec(len, '\0');
    is.read(rec.data(), len);
    if (!is) throw Error(Errc::BadRecord, "truncated sample stream");
    std::istringstream buf(rec, std::ios::binary);
    out.push_back(read_binary(buf));
  }
  return out;
}

namespace {

// Sphere exponential chart centered at e1: y in R^{N-1} (components along
// e2..eN) maps to cos(|y|) e1 + sin(|y|) y/|y|.
Vec chart_point(const Vec& y_embedded) {
  const double r = norm(y_embedded);
  const int n = y_embedded.dim();
  Vec s(n);
  if (r < 1e-300) {
    s[0] = 1.0;
    return s;
  }
  s = (std::sin(r) / r) * y_embedded;
  s[0] = std::cos(r);
  return s;
}

}  // namespace

std::vector<double> hessian_spectrum_in_chart(const SpinChain& chain, double fd_step) {
  const int L = chain.length(), n = chain.n_dim(), d = n - 1;
  const int dim = L * d;
  // Chart coordinates of the current configuration.
  std::vector<double> y0(static_cast<size_t>(dim), 0.0);
  for (int i = 0; i < L; ++i) {
    const Vec s = chain.spin_vec(i);
    const double theta = geometry::geodesic_distance(s, Vec::basis(n, 0));
    double tail = 0.0;
    for (int k = 1; k < n; ++k) tail += s[k] * s[k];
    const double scale = tail > 1e-300 ? theta / std::sqrt(tail) : 0.0;
    for (int k = 1; k < n; ++k) y0[static_cast<size_t>(i) * d + (k - 1)] = scale * s[k];
  }
  auto energy_at = [&](const std::vector<double>& y) {
    SpinChain c(n, L, chain.bc());
    for (int i = 0; i < L; ++i) {
      Vec emb(n);
      for (int k = 1; k < n; ++k) emb[k] = y[static_cast<size_t>(i) * d + (k - 1)];
      c.set_spin(i, chart_point(emb));
    }
    return energy(c);
  };
  const double h = fd_step;
  std::vector<double> hess(static_cast<size_t>(dim) * dim, 0.0);
  const double e0 = energy_at(y0);
  std::vector<double> y = y0;
  for (int a = 0; a < dim; ++a) {
    for (int b = a; b < dim; ++b) {
      double v;
      if (a == b) {
        y[a] = y0[a] + h;
        const double ep = energy_at(y);
        y[a] = y0[a] - h;
        const double em = energy_at(y);
        y[a] = y0[a];
        v = (ep - 2.0 * e0 + em) / (h * h);
      } else {
        y[a] = y0[a] + h; y[b] = y0[b] + h;
        const double epp = energy_at(y);
        y[b] = y0[b] - h;
        const double epm = energy_at(y);
        y[a] = y0[a] - h; y[b] = y0[b] + h;
        const double emp = energy_at(y);
        y[b] = y0[b] - h;
        const double emm = energy_at(y);
        y[a] = y0[a]; y[b] = y0[b];
        v = (epp - epm - emp + emm) / (4.0 * h * h);
      }
      hess[static_cast<size_t>(a) * dim + b] = v;
      hess[static_cast<size_t>(b) * dim + a] = v;
    }
  }
  return linalg::jacobi_eigenvalues(std::move(hess), dim);
}

}  // namespace spinchain::model
