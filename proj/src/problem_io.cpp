#include "spock/problem_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spock {

namespace {
constexpr const char* kProblemMagic = "spock-problem v1";
constexpr const char* kSolutionMagic = "spock-solution v1";

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("problem_io: " + msg); }
}  // namespace

void Document::put_int(const std::string& name, int64_t v) {
  meta_.push_back({'i', name, std::to_string(v)});
}

void Document::put_str(const std::string& name, const std::string& v) {
  meta_.push_back({'s', name, v});
}

void Document::put_mat(const std::string& name, const Eigen::MatrixXd& m) {
  Arr a;
  a.name = name;
  a.dtype = 'f';
  a.rows = m.rows();
  a.cols = m.cols();
  a.f64.resize(static_cast<size_t>(m.size()));
  // row-major payload
  for (int64_t i = 0; i < m.rows(); ++i)
    for (int64_t j = 0; j < m.cols(); ++j) a.f64[static_cast<size_t>(i * m.cols() + j)] = m(i, j);
  arrays_.push_back(std::move(a));
}

void Document::put_vec(const std::string& name, const Eigen::VectorXd& v) {
  Arr a;
  a.name = name;
  a.dtype = 'f';
  a.rows = v.size();
  a.cols = 1;
  a.f64.assign(v.data(), v.data() + v.size());
  arrays_.push_back(std::move(a));
}

void Document::put_ints(const std::string& name, const std::vector<int>& v) {
  Arr a;
  a.name = name;
  a.dtype = 'l';
  a.rows = static_cast<int64_t>(v.size());
  a.cols = 1;
  a.i64.assign(v.begin(), v.end());
  arrays_.push_back(std::move(a));
}

int64_t Document::get_int(const std::string& name) const {
  for (const auto& m : meta_)
    if (m.tag == 'i' && m.name == name) return std::stoll(m.value);
  fail("missing integer field " + name);
}

std::string Document::get_str(const std::string& name) const {
  for (const auto& m : meta_)
    if (m.tag == 's' && m.name == name) return m.value;
  fail("missing string field " + name);
}

const Document::Arr& Document::find_arr(const std::string& name) const {
  for (const auto& a : arrays_)
    if (a.name == name) return a;
  fail("missing array " + name);
}

bool Document::has(const std::string& name) const {
  for (const auto& m : meta_)
    if (m.name == name) return true;
  for (const auto& a : arrays_)
    if (a.name == name) return true;
  return false;
}

Eigen::MatrixXd Document::get_mat(const std::string& name) const {
  const Arr& a = find_arr(name);
  if (a.dtype != 'f') fail("array " + name + " is not f64");
  Eigen::MatrixXd m(a.rows, a.cols);
  for (int64_t i = 0; i < a.rows; ++i)
    for (int64_t j = 0; j < a.cols; ++j) m(i, j) = a.f64[static_cast<size_t>(i * a.cols + j)];
  return m;
}

Eigen::VectorXd Document::get_vec(const std::string& name) const {
  const Arr& a = find_arr(name);
  if (a.dtype != 'f' || a.cols != 1) fail("array " + name + " is not an f64 vector");
  return Eigen::Map<const Eigen::VectorXd>(a.f64.data(), a.rows);
}

std::vector<int> Document::get_ints(const std::string& name) const {
  const Arr& a = find_arr(name);
  if (a.dtype != 'l') fail("array " + name + " is not i64");
  return std::vector<int>(a.i64.begin(), a.i64.end());
}

void Document::save(const std::string& path, const std::string& magic) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail("cannot open " + path + " for writing");
  f << magic << "\n";
  for (const auto& m : meta_) f << "meta " << m.tag << " " << m.name << " " << m.value << "\n";
  for (const auto& a : arrays_) {
    f << "arr " << a.name << " " << (a.dtype == 'f' ? "f64" : "i64") << " " << a.rows << " "
      << a.cols << "\n";
    if (a.dtype == 'f')
      f.write(reinterpret_cast<const char*>(a.f64.data()),
              static_cast<std::streamsize>(a.f64.size() * sizeof(double)));
    else
      f.write(reinterpret_cast<const char*>(a.i64.data()),
              static_cast<std::streamsize>(a.i64.size() * sizeof(int64_t)));
    f << "\n";
  }
  f << "end\n";
  if (!f) fail("write failed for " + path);
}

Document Document::load(const std::string& path, const std::string& expected_magic) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != expected_magic)
    fail(path + ": bad magic (expected '" + expected_magic + "')");

  Document doc;
  while (std::getline(f, line)) {
    if (line == "end") return doc;
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "meta") {
      Meta m;
      ss >> m.tag >> m.name;
      std::getline(ss, m.value);
      if (!m.value.empty() && m.value.front() == ' ') m.value.erase(0, 1);
      doc.meta_.push_back(std::move(m));
    } else if (kind == "arr") {
      Arr a;
      std::string dtype;
      ss >> a.name >> dtype >> a.rows >> a.cols;
      if (a.rows < 0 || a.cols < 0) fail("negative array dims");
      a.dtype = dtype == "f64" ? 'f' : 'l';
      const size_t count = static_cast<size_t>(a.rows) * static_cast<size_t>(a.cols);
      if (a.dtype == 'f') {
        a.f64.resize(count);
        f.read(reinterpret_cast<char*>(a.f64.data()),
               static_cast<std::streamsize>(count * sizeof(double)));
      } else {
        a.i64.resize(count);
        f.read(reinterpret_cast<char*>(a.i64.data()),
               static_cast<std::streamsize>(count * sizeof(int64_t)));
      }
      if (!f) fail("truncated payload for array " + a.name);
      f.ignore(1);  // trailing newline
      doc.arrays_.push_back(std::move(a));
    } else {
      fail("unknown record '" + kind + "'");
    }
  }
  fail("missing end marker in " + path);
}

namespace {

std::string cone_to_string(const ConeDesc& c) {
  std::string s;
  for (const auto& p : c.parts) {
    if (!s.empty()) s += ",";
    switch (p.kind) {
      case ConeKind::Zero: s += "zero:"; break;
      case ConeKind::NonnegOrthant: s += "nn:"; break;
      case ConeKind::Soc: s += "soc:"; break;
      case ConeKind::Free: s += "free:"; break;
    }
    s += std::to_string(p.dim);
  }
  return s;
}

ConeDesc cone_from_string(const std::string& s) {
  ConeDesc c;
  std::istringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) fail("bad cone descriptor " + s);
    const std::string kind = part.substr(0, colon);
    const int dim = std::stoi(part.substr(colon + 1));
    if (kind == "zero")
      c.parts.push_back({ConeKind::Zero, dim});
    else if (kind == "nn")
      c.parts.push_back({ConeKind::NonnegOrthant, dim});
    else if (kind == "soc")
      c.parts.push_back({ConeKind::Soc, dim});
    else if (kind == "free")
      c.parts.push_back({ConeKind::Free, dim});
    else
      fail("bad cone kind " + kind);
  }
  return c;
}

Eigen::MatrixXd stack_mats(const std::vector<Eigen::MatrixXd>& ms) {
  if (ms.empty()) return {};
  const int64_t r = ms[0].rows(), c = ms[0].cols();
  Eigen::MatrixXd out(r * static_cast<int64_t>(ms.size()), c);
  for (size_t k = 0; k < ms.size(); ++k) out.middleRows(static_cast<int64_t>(k) * r, r) = ms[k];
  return out;
}

Eigen::VectorXd stack_vecs(const std::vector<Eigen::VectorXd>& vs) {
  if (vs.empty()) return {};
  const int64_t r = vs[0].size();
  Eigen::VectorXd out(r * static_cast<int64_t>(vs.size()));
  for (size_t k = 0; k < vs.size(); ++k) out.segment(static_cast<int64_t>(k) * r, r) = vs[k];
  return out;
}

std::vector<Eigen::MatrixXd> unstack_mats(const Eigen::MatrixXd& m, int count, int rows) {
  std::vector<Eigen::MatrixXd> out(count);
  for (int k = 0; k < count; ++k) out[k] = m.middleRows(static_cast<int64_t>(k) * rows, rows);
  return out;
}

std::vector<Eigen::VectorXd> unstack_vecs(const Eigen::VectorXd& v, int count, int rows) {
  std::vector<Eigen::VectorXd> out(count);
  for (int k = 0; k < count; ++k) out[k] = v.segment(static_cast<int64_t>(k) * rows, rows);
  return out;
}

}  // namespace

void save_problem(const std::string& path, const Raocp& p, bool include_soc_translations) {
  p.validate();
  const auto& tr = *p.tree;
  Document d;
  d.put_int("num_nodes", tr.num_nodes());
  d.put_int("horizon", tr.horizon());
  d.put_int("stop_stage", tr.stop_stage());
  d.put_int("num_events", tr.num_events());
  d.put_int("nx", p.nx);
  d.put_int("nu", p.nu);
  d.put_ints("tree.anc", tr.ancestors());
  d.put_ints("tree.event", tr.events());
  d.put_vec("tree.prob", Eigen::Map<const Eigen::VectorXd>(tr.probs().data(), tr.num_nodes()));
  d.put_vec("tree.cond_prob",
            Eigen::Map<const Eigen::VectorXd>(tr.cond_probs().data(), tr.num_nodes()));
  d.put_vec("x_init", p.x_init);
  d.put_mat("dyn.A", stack_mats(p.A));
  d.put_mat("dyn.B", stack_mats(p.B));
  d.put_vec("dyn.c", stack_vecs(p.c));
  d.put_mat("cost.Q", stack_mats(p.Q));
  d.put_mat("cost.R", stack_mats(p.R));
  d.put_vec("cost.q", stack_vecs(p.q));
  d.put_vec("cost.r", stack_vecs(p.r));
  d.put_mat("term.QN", stack_mats(p.QN));
  d.put_vec("term.qN", stack_vecs(p.qN));

  for (int i = 0; i < tr.num_nonleaf(); ++i) {
    const std::string pre = "cstr." + std::to_string(i) + ".";
    d.put_mat(pre + "Gx", p.Gx[i]);
    d.put_mat(pre + "Gu", p.Gu[i]);
    d.put_vec(pre + "lo", p.C[i].lo);
    d.put_vec(pre + "hi", p.C[i].hi);
    const std::string rp = "risk." + std::to_string(i) + ".";
    const RiskSpec& rs = p.risk[i];
    if (rs.kind == RiskSpec::Kind::Avar) {
      d.put_str(rp + "kind", "avar");
      d.put_vec(rp + "gamma", Eigen::VectorXd::Constant(1, rs.gamma));
      d.put_vec(rp + "pi", rs.pi);
    } else {
      d.put_str(rp + "kind", "general");
      d.put_str(rp + "cone", cone_to_string(rs.cone));
      d.put_mat(rp + "E", rs.E);
      d.put_mat(rp + "F", rs.F);
      d.put_vec(rp + "b", rs.b);
    }
  }
  for (int j = 0; j < tr.num_leaves(); ++j) {
    const std::string pre = "cstrN." + std::to_string(j) + ".";
    d.put_mat(pre + "G", p.GN[j]);
    d.put_vec(pre + "lo", p.CN[j].lo);
    d.put_vec(pre + "hi", p.CN[j].hi);
  }
  if (include_soc_translations) {
    const SocEpigraphData soc = soc_epigraph_data(p);
    for (int i = 1; i < tr.num_nodes(); ++i)
      d.put_vec("soc.stage." + std::to_string(i) + ".a", soc.stage[i - 1].a);
    for (int j = 0; j < tr.num_leaves(); ++j)
      d.put_vec("soc.leaf." + std::to_string(j) + ".a", soc.leaf[j].a);
  }
  d.save(path, kProblemMagic);
}

Raocp load_problem(const std::string& path) {
  const Document d = Document::load(path, kProblemMagic);
  const int nn = static_cast<int>(d.get_int("num_nodes"));
  const int nx = static_cast<int>(d.get_int("nx"));
  const int nu = static_cast<int>(d.get_int("nu"));

  const Eigen::VectorXd prob = d.get_vec("tree.prob");
  const Eigen::VectorXd cprob = d.get_vec("tree.cond_prob");
  auto tree = std::make_shared<ScenarioTree>(ScenarioTree::from_arrays(
      static_cast<int>(d.get_int("horizon")), static_cast<int>(d.get_int("stop_stage")),
      static_cast<int>(d.get_int("num_events")), d.get_ints("tree.anc"), d.get_ints("tree.event"),
      std::vector<double>(prob.data(), prob.data() + nn),
      std::vector<double>(cprob.data(), cprob.data() + nn)));

  Raocp p;
  p.tree = tree;
  p.nx = nx;
  p.nu = nu;
  p.x_init = d.get_vec("x_init");
  p.A = unstack_mats(d.get_mat("dyn.A"), nn - 1, nx);
  p.B = unstack_mats(d.get_mat("dyn.B"), nn - 1, nx);
  p.c = unstack_vecs(d.get_vec("dyn.c"), nn - 1, nx);
  p.Q = unstack_mats(d.get_mat("cost.Q"), nn - 1, nx);
  p.R = unstack_mats(d.get_mat("cost.R"), nn - 1, nu);
  p.q = unstack_vecs(d.get_vec("cost.q"), nn - 1, nx);
  p.r = unstack_vecs(d.get_vec("cost.r"), nn - 1, nu);
  const int nl = tree->num_leaves();
  p.QN = unstack_mats(d.get_mat("term.QN"), nl, nx);
  p.qN = unstack_vecs(d.get_vec("term.qN"), nl, nx);

  const int nnl = tree->num_nonleaf();
  p.Gx.resize(nnl);
  p.Gu.resize(nnl);
  p.C.resize(nnl);
  p.risk.resize(nnl);
  for (int i = 0; i < nnl; ++i) {
    const std::string pre = "cstr." + std::to_string(i) + ".";
    p.Gx[i] = d.get_mat(pre + "Gx");
    p.Gu[i] = d.get_mat(pre + "Gu");
    p.C[i] = Box{d.get_vec(pre + "lo"), d.get_vec(pre + "hi")};
    const std::string rp = "risk." + std::to_string(i) + ".";
    if (d.get_str(rp + "kind") == "avar") {
      p.risk[i] = avar_spec(d.get_vec(rp + "gamma")[0], d.get_vec(rp + "pi"));
    } else {
      RiskSpec rs;
      rs.kind = RiskSpec::Kind::General;
      rs.cone = cone_from_string(d.get_str(rp + "cone"));
      rs.E = d.get_mat(rp + "E");
      rs.F = d.get_mat(rp + "F");
      rs.b = d.get_vec(rp + "b");
      rs.n = static_cast<int>(rs.E.cols());
      p.risk[i] = std::move(rs);
    }
  }
  p.GN.resize(nl);
  p.CN.resize(nl);
  for (int j = 0; j < nl; ++j) {
    const std::string pre = "cstrN." + std::to_string(j) + ".";
    p.GN[j] = d.get_mat(pre + "G");
    p.CN[j] = Box{d.get_vec(pre + "lo"), d.get_vec(pre + "hi")};
  }
  p.validate();
  return p;
}

void save_solution(const std::string& path, const SolveResult& r) {
  Document d;
  d.put_int("iterations", r.status.iterations);
  d.put_str("reason", to_string(r.status.reason));
  d.put_int("k0", r.status.k0_steps);
  d.put_int("k1", r.status.k1_steps);
  d.put_int("k2", r.status.k2_steps);
  d.put_int("stalled", r.status.stalled_steps);
  d.put_vec("xi", Eigen::Vector2d(r.status.xi1_inf, r.status.xi2_inf));
  d.put_vec("alpha", Eigen::VectorXd::Constant(1, r.status.alpha));
  d.put_vec("z", r.z);
  d.put_vec("z_scaled", r.z_scaled);
  d.put_vec("eta", r.eta);
  d.save(path, kSolutionMagic);
}

SolveResult load_solution(const std::string& path) {
  const Document d = Document::load(path, kSolutionMagic);
  SolveResult r;
  r.status.iterations = static_cast<int>(d.get_int("iterations"));
  const std::string reason = d.get_str("reason");
  if (reason == "converged")
    r.status.reason = SpockTermination::Converged;
  else if (reason == "max_iters")
    r.status.reason = SpockTermination::MaxIters;
  else if (reason == "stalled")
    r.status.reason = SpockTermination::Stalled;
  else
    r.status.reason = SpockTermination::Cancelled;
  r.status.k0_steps = static_cast<int>(d.get_int("k0"));
  r.status.k1_steps = static_cast<int>(d.get_int("k1"));
  r.status.k2_steps = static_cast<int>(d.get_int("k2"));
  r.status.stalled_steps = static_cast<int>(d.get_int("stalled"));
  const Eigen::VectorXd xi = d.get_vec("xi");
  r.status.xi1_inf = xi[0];
  r.status.xi2_inf = xi[1];
  r.status.alpha = d.get_vec("alpha")[0];
  r.z = d.get_vec("z");
  r.z_scaled = d.get_vec("z_scaled");
  r.eta = d.get_vec("eta");
  return r;
}

}  // namespace spock
