// Copyright 2026 The i2c Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied. See the License for the specific language governing
// permissions and limitations under the License.

#include "i2c/environments.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace i2c {

namespace {

double clamp_input(double u, double u_max) {
  return u_max * std::tanh(u / u_max);
}

double clamp_input_grad(double u, double u_max) {
  double t = std::tanh(u / u_max);
  return 1.0 - t * t;
}

VectorXd diag_vec(std::initializer_list<double> v) {
  VectorXd d(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) d[i++] = x;
  return d;
}

MatrixXd diag_mat(std::initializer_list<double> v) {
  return MatrixXd(diag_vec(v).asDiagonal());
}

}  // namespace

double wrap_angle(double a) {
  double w = std::fmod(a + M_PI, 2.0 * M_PI);
  if (w < 0.0) w += 2.0 * M_PI;
  return w - M_PI;
}

// ---------------------------------------------------------------------------
// Pendulum: x = (theta, thetadot), theta = 0 upright, torque-limited.
// ---------------------------------------------------------------------------

SystemModel pendulum_dynamics(const PendulumParams& p) {
  SystemModel sys;
  sys.state_dim = 2;
  sys.input_dim = 1;
  sys.name = "pendulum";
  sys.process_noise = diag_mat({1e-8, 4e-4});
  const double inertia = p.mass * p.length * p.length;
  sys.step = [p, inertia](int, const VectorXd& x, const VectorXd& u) {
    const double u_eff = clamp_input(u[0], p.u_max);
    const double acc = (p.gravity / p.length) * std::sin(x[0]) +
                       (u_eff - p.damping * x[1]) / inertia;
    VectorXd next(2);
    next[1] = x[1] + p.dt * acc;
    next[0] = x[0] + p.dt * next[1];
    return next;
  };
  sys.jacobian = [p, inertia](int, const VectorXd& x, const VectorXd& u) {
    const double da_dth = (p.gravity / p.length) * std::cos(x[0]);
    const double da_dw = -p.damping / inertia;
    const double da_du = clamp_input_grad(u[0], p.u_max) / inertia;
    MatrixXd j(2, 3);
    j << 1.0 + p.dt * p.dt * da_dth, p.dt + p.dt * p.dt * da_dw,
        p.dt * p.dt * da_du, p.dt * da_dth, 1.0 + p.dt * da_dw, p.dt * da_du;
    return j;
  };
  return sys;
}

Environment make_pendulum(const PendulumParams& p) {
  Environment env;
  env.name = "pendulum";
  env.sys = pendulum_dynamics(p);
  env.horizon = 100;

  QuadraticFeatureCost cost;
  cost.dx = 2;
  cost.du = 1;
  cost.dz = 4;
  cost.dz_term = 3;
  cost.features = [](int, const VectorXd& x, const VectorXd& u) {
    VectorXd z(4);
    z << std::sin(x[0]), std::cos(x[0]), x[1], u[0];
    return z;
  };
  cost.features_jacobian = [](int, const VectorXd& x, const VectorXd&) {
    MatrixXd h = MatrixXd::Zero(4, 3);
    h(0, 0) = std::cos(x[0]);
    h(1, 0) = -std::sin(x[0]);
    h(2, 1) = 1.0;
    h(3, 2) = 1.0;
    return h;
  };
  VectorXd target = diag_vec({0.0, 1.0, 0.0, 0.0});
  cost.target = [target](int) { return target; };
  MatrixXd theta = diag_mat({10.0, 10.0, 0.1, 0.2});
  cost.weight = [theta](int) { return theta; };
  cost.terminal_features = [](const VectorXd& x) {
    VectorXd z(3);
    z << std::sin(x[0]), std::cos(x[0]), x[1];
    return z;
  };
  cost.terminal_features_jacobian = [](const VectorXd& x) {
    MatrixXd h = MatrixXd::Zero(3, 2);
    h(0, 0) = std::cos(x[0]);
    h(1, 0) = -std::sin(x[0]);
    h(2, 1) = 1.0;
    return h;
  };
  cost.terminal_target = diag_vec({0.0, 1.0, 0.0});
  cost.terminal_weight = diag_mat({100.0, 100.0, 2.0});
  env.cost = cost;

  env.init = Gaussian(diag_vec({M_PI, 0.0}), diag_mat({1e-6, 1e-6}));
  env.input_prior_cov = diag_mat({1.0});
  return env;
}

// ---------------------------------------------------------------------------
// Cartpole: x = (p, theta, pdot, thetadot), theta = 0 upright, force input.
// ---------------------------------------------------------------------------

SystemModel cartpole_dynamics(const CartpoleParams& p) {
  SystemModel sys;
  sys.state_dim = 4;
  sys.input_dim = 1;
  sys.name = "cartpole";
  sys.process_noise = diag_mat({1e-8, 1e-8, 1e-4, 4e-4});
  sys.step = [p](int, const VectorXd& x, const VectorXd& u) {
    const double s = std::sin(x[1]), c = std::cos(x[1]);
    const double f = clamp_input(u[0], p.u_max);
    const double ml = p.pole_mass * p.length;
    Eigen::Matrix2d m;
    m << p.cart_mass + p.pole_mass, ml * c, ml * c, ml * p.length;
    Eigen::Vector2d rhs;
    rhs << f - p.cart_damping * x[2] + ml * s * x[3] * x[3],
        p.pole_mass * p.gravity * p.length * s - p.pole_damping * x[3];
    Eigen::Vector2d acc = m.ldlt().solve(rhs);
    VectorXd next(4);
    next[2] = x[2] + p.dt * acc[0];
    next[3] = x[3] + p.dt * acc[1];
    next[0] = x[0] + p.dt * next[2];
    next[1] = x[1] + p.dt * next[3];
    return next;
  };
  return sys;
}

Environment make_cartpole(const CartpoleParams& p) {
  Environment env;
  env.name = "cartpole";
  env.sys = cartpole_dynamics(p);
  env.horizon = 100;

  QuadraticFeatureCost cost;
  cost.dx = 4;
  cost.du = 1;
  cost.dz = 6;
  cost.dz_term = 5;
  cost.features = [](int, const VectorXd& x, const VectorXd& u) {
    VectorXd z(6);
    z << x[0], std::sin(x[1]), std::cos(x[1]), x[2], x[3], u[0];
    return z;
  };
  cost.features_jacobian = [](int, const VectorXd& x, const VectorXd&) {
    MatrixXd h = MatrixXd::Zero(6, 5);
    h(0, 0) = 1.0;
    h(1, 1) = std::cos(x[1]);
    h(2, 1) = -std::sin(x[1]);
    h(3, 2) = 1.0;
    h(4, 3) = 1.0;
    h(5, 4) = 1.0;
    return h;
  };
  VectorXd target = diag_vec({0.0, 0.0, 1.0, 0.0, 0.0, 0.0});
  cost.target = [target](int) { return target; };
  MatrixXd theta = diag_mat({1.0, 20.0, 20.0, 0.1, 0.1, 0.02});
  cost.weight = [theta](int) { return theta; };
  cost.terminal_features = [](const VectorXd& x) {
    VectorXd z(5);
    z << x[0], std::sin(x[1]), std::cos(x[1]), x[2], x[3];
    return z;
  };
  cost.terminal_features_jacobian = [](const VectorXd& x) {
    MatrixXd h = MatrixXd::Zero(5, 4);
    h(0, 0) = 1.0;
    h(1, 1) = std::cos(x[1]);
    h(2, 1) = -std::sin(x[1]);
    h(3, 2) = 1.0;
    h(4, 3) = 1.0;
    return h;
  };
  cost.terminal_target = diag_vec({0.0, 0.0, 1.0, 0.0, 0.0});
  cost.terminal_weight = diag_mat({10.0, 100.0, 100.0, 1.0, 1.0});
  env.cost = cost;

  env.init = Gaussian(diag_vec({0.0, M_PI, 0.0, 0.0}),
                      diag_mat({1e-6, 1e-6, 1e-6, 1e-6}));
  env.input_prior_cov = diag_mat({9.0});
  return env;
}

// ---------------------------------------------------------------------------
// Double cartpole: x = (p, th1, th2, pdot, th1dot, th2dot), both angles from
// upright; point masses at the link ends.
// ---------------------------------------------------------------------------

SystemModel double_cartpole_dynamics(const DoubleCartpoleParams& p) {
  SystemModel sys;
  sys.state_dim = 6;
  sys.input_dim = 1;
  sys.name = "double_cartpole";
  sys.process_noise = diag_mat({1e-8, 1e-8, 1e-8, 1e-4, 1e-4, 1e-4});
  sys.step = [p](int, const VectorXd& x, const VectorXd& u) {
    const double s1 = std::sin(x[1]), c1 = std::cos(x[1]);
    const double s2 = std::sin(x[2]), c2 = std::cos(x[2]);
    const double s12 = std::sin(x[1] - x[2]), c12 = std::cos(x[1] - x[2]);
    const double f = clamp_input(u[0], p.u_max);
    const double m12 = p.mass1 + p.mass2;
    Eigen::Matrix3d m;
    m << p.cart_mass + m12, m12 * p.length1 * c1, p.mass2 * p.length2 * c2,
        m12 * p.length1 * c1, m12 * p.length1 * p.length1,
        p.mass2 * p.length1 * p.length2 * c12, p.mass2 * p.length2 * c2,
        p.mass2 * p.length1 * p.length2 * c12,
        p.mass2 * p.length2 * p.length2;
    Eigen::Vector3d rhs;
    rhs[0] = f - p.cart_damping * x[3] + m12 * p.length1 * s1 * x[4] * x[4] +
             p.mass2 * p.length2 * s2 * x[5] * x[5];
    rhs[1] = m12 * p.gravity * p.length1 * s1 - p.joint_damping * x[4] -
             p.mass2 * p.length1 * p.length2 * s12 * x[5] * x[5];
    rhs[2] = p.mass2 * p.gravity * p.length2 * s2 - p.joint_damping * x[5] +
             p.mass2 * p.length1 * p.length2 * s12 * x[4] * x[4];
    Eigen::Vector3d acc = m.ldlt().solve(rhs);
    VectorXd next(6);
    next.tail(3) = x.tail(3) + p.dt * acc;
    next.head(3) = x.head(3) + p.dt * next.tail(3);
    return next;
  };
  return sys;
}

Environment make_double_cartpole(const DoubleCartpoleParams& p) {
  Environment env;
  env.name = "double_cartpole";
  env.sys = double_cartpole_dynamics(p);
  env.horizon = 150;

  QuadraticFeatureCost cost;
  cost.dx = 6;
  cost.du = 1;
  cost.dz = 9;
  cost.dz_term = 8;
  cost.features = [](int, const VectorXd& x, const VectorXd& u) {
    VectorXd z(9);
    z << x[0], std::sin(x[1]), std::cos(x[1]), std::sin(x[2]), std::cos(x[2]),
        x[3], x[4], x[5], u[0];
    return z;
  };
  VectorXd target = diag_vec({0, 0, 1, 0, 1, 0, 0, 0, 0});
  cost.target = [target](int) { return target; };
  MatrixXd theta = diag_mat({1.0, 20.0, 20.0, 20.0, 20.0, 0.1, 0.1, 0.1, 0.02});
  cost.weight = [theta](int) { return theta; };
  cost.terminal_features = [](const VectorXd& x) {
    VectorXd z(8);
    z << x[0], std::sin(x[1]), std::cos(x[1]), std::sin(x[2]), std::cos(x[2]),
        x[3], x[4], x[5];
    return z;
  };
  cost.terminal_target = diag_vec({0, 0, 1, 0, 1, 0, 0, 0});
  cost.terminal_weight =
      diag_mat({10.0, 100.0, 100.0, 100.0, 100.0, 1.0, 1.0, 1.0});
  env.cost = cost;

  env.init = Gaussian(diag_vec({0.0, M_PI, M_PI, 0.0, 0.0, 0.0}),
                      MatrixXd(1e-6 * MatrixXd::Identity(6, 6)));
  env.input_prior_cov = diag_mat({25.0});
  return env;
}

// ---------------------------------------------------------------------------
// Planar quadcopter: x = (px, py, theta, vx, vy, thetadot), two rotor
// thrusts around hover; left/right rotor pose-and-velocity measurement.
// ---------------------------------------------------------------------------

SystemModel quadcopter_dynamics(const QuadcopterParams& p) {
  SystemModel sys;
  sys.state_dim = 6;
  sys.input_dim = 2;
  sys.name = "quadcopter";
  sys.process_noise = diag_mat({1e-8, 1e-8, 1e-8, 1e-4, 1e-4, 4e-4});
  const double hover = 0.5 * p.mass * p.gravity;
  const double lim = 0.5 * p.mass * p.gravity;
  sys.step = [p, hover, lim](int, const VectorXd& x, const VectorXd& u) {
    const double f1 = hover + clamp_input(u[0], lim);
    const double f2 = hover + clamp_input(u[1], lim);
    const double s = std::sin(x[2]), c = std::cos(x[2]);
    const double ax = -(f1 + f2) * s / p.mass;
    const double ay = (f1 + f2) * c / p.mass - p.gravity;
    const double aw = p.arm * (f1 - f2) / p.inertia;
    VectorXd next(6);
    next[3] = x[3] + p.dt * ax;
    next[4] = x[4] + p.dt * ay;
    next[5] = x[5] + p.dt * aw;
    next[0] = x[0] + p.dt * next[3];
    next[1] = x[1] + p.dt * next[4];
    next[2] = x[2] + p.dt * next[5];
    return next;
  };
  sys.jacobian = [p, hover, lim](int, const VectorXd& x, const VectorXd& u) {
    const double f1 = hover + clamp_input(u[0], lim);
    const double f2 = hover + clamp_input(u[1], lim);
    const double g1 = clamp_input_grad(u[0], lim);
    const double g2 = clamp_input_grad(u[1], lim);
    const double s = std::sin(x[2]), c = std::cos(x[2]);
    const double thrust = f1 + f2;
    const double dt = p.dt;
    MatrixXd j = MatrixXd::Zero(6, 8);
    // Velocity rows.
    j(3, 3) = 1.0;
    j(3, 2) = -dt * thrust * c / p.mass;
    j(3, 6) = -dt * s * g1 / p.mass;
    j(3, 7) = -dt * s * g2 / p.mass;
    j(4, 4) = 1.0;
    j(4, 2) = -dt * thrust * s / p.mass;
    j(4, 6) = dt * c * g1 / p.mass;
    j(4, 7) = dt * c * g2 / p.mass;
    j(5, 5) = 1.0;
    j(5, 6) = dt * p.arm * g1 / p.inertia;
    j(5, 7) = -dt * p.arm * g2 / p.inertia;
    // Position rows: p' = p + dt v'.
    j.row(0) = dt * j.row(3);
    j(0, 0) = 1.0;
    j.row(1) = dt * j.row(4);
    j(1, 1) = 1.0;
    j.row(2) = dt * j.row(5);
    j(2, 2) = 1.0;
    return j;
  };
  const double r = p.arm;
  sys.meas_dim = 8;
  sys.measure = [r](const VectorXd& x) {
    const double s = std::sin(x[2]), c = std::cos(x[2]);
    VectorXd y(8);
    y << x[0] - r * c, x[1] - r * s,               // left rotor position
        x[0] + r * c, x[1] + r * s,                // right rotor position
        x[3] + r * s * x[5], x[4] - r * c * x[5],  // left rotor velocity
        x[3] - r * s * x[5], x[4] + r * c * x[5];  // right rotor velocity
    return y;
  };
  sys.meas_noise =
      diag_mat({1e-4, 1e-4, 1e-4, 1e-4, 1e-3, 1e-3, 1e-3, 1e-3});
  return sys;
}

std::vector<PathPoint> default_quadcopter_path() {
  // Three phases: smooth translation, a full 360-degree flip while roughly
  // holding position, then a smooth return descent. Min-jerk blending keeps
  // targets differentiable. 4.5 s at dt = 0.025 -> 181 points.
  const double dt = 0.025;
  const int n = 181;
  auto minjerk = [](double s) {
    s = std::min(std::max(s, 0.0), 1.0);
    return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
  };
  std::vector<PathPoint> path(n);
  for (int i = 0; i < n; ++i) {
    const double t = i * dt;
    PathPoint pt;
    pt.t = t;
    if (t < 1.5) {
      const double s = minjerk(t / 1.5);
      pt.x = 1.6 * s;
      pt.y = 0.8 * s;
      pt.theta = 0.0;
    } else if (t < 2.5) {
      const double s = minjerk((t - 1.5) / 1.0);
      pt.x = 1.6 + 0.2 * s;
      pt.y = 0.8;
      pt.theta = 2.0 * M_PI * s;  // the flip
    } else {
      const double s = minjerk((t - 2.5) / 1.5);
      pt.x = 1.8 + 1.0 * s;
      pt.y = 0.8 - 0.6 * s;
      pt.theta = 2.0 * M_PI;
    }
    path[i] = pt;
  }
  return path;
}

std::vector<PathPoint> load_path_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open path file: " + file);
  std::vector<PathPoint> path;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == 't' || line[0] == '#') continue;
    std::stringstream ss(line);
    PathPoint pt;
    char comma;
    if (ss >> pt.t >> comma >> pt.x >> comma >> pt.y >> comma >> pt.theta)
      path.push_back(pt);
  }
  if (path.size() < 2) throw ConfigError("path file too short: " + file);
  return path;
}

Environment make_quadcopter(const std::vector<PathPoint>& path,
                            const QuadcopterParams& p) {
  Environment env;
  env.name = "quadcopter";
  env.sys = quadcopter_dynamics(p);
  env.horizon = static_cast<int>(path.size());

  const double dt = p.dt;
  auto ref = [path, dt](int t) {
    const int n = static_cast<int>(path.size());
    const int i = std::min(std::max(t, 0), n - 1);
    const int j = std::min(i + 1, n - 1);
    VectorXd z(8);
    const double vx = (path[j].x - path[i].x) / dt;
    const double vy = (path[j].y - path[i].y) / dt;
    z << path[i].x, path[i].y, std::sin(path[i].theta),
        std::cos(path[i].theta), (i == j) ? 0.0 : vx, (i == j) ? 0.0 : vy,
        0.0, 0.0;
    return z;
  };

  QuadraticFeatureCost cost;
  cost.dx = 6;
  cost.du = 2;
  cost.dz = 8;
  cost.dz_term = 6;
  cost.features = [](int, const VectorXd& x, const VectorXd& u) {
    VectorXd z(8);
    z << x[0], x[1], std::sin(x[2]), std::cos(x[2]), x[3], x[4], u[0], u[1];
    return z;
  };
  cost.features_jacobian = [](int, const VectorXd& x, const VectorXd&) {
    MatrixXd h = MatrixXd::Zero(8, 8);
    h(0, 0) = 1.0;
    h(1, 1) = 1.0;
    h(2, 2) = std::cos(x[2]);
    h(3, 2) = -std::sin(x[2]);
    h(4, 3) = 1.0;
    h(5, 4) = 1.0;
    h(6, 6) = 1.0;
    h(7, 7) = 1.0;
    return h;
  };
  cost.target = ref;
  MatrixXd theta = diag_mat({20.0, 20.0, 4.0, 4.0, 0.5, 0.5, 0.1, 0.1});
  cost.weight = [theta](int) { return theta; };
  cost.terminal_features = [](const VectorXd& x) {
    VectorXd z(6);
    z << x[0], x[1], std::sin(x[2]), std::cos(x[2]), x[3], x[4];
    return z;
  };
  cost.terminal_features_jacobian = [](const VectorXd& x) {
    MatrixXd h = MatrixXd::Zero(6, 6);
    h(0, 0) = 1.0;
    h(1, 1) = 1.0;
    h(2, 2) = std::cos(x[2]);
    h(3, 2) = -std::sin(x[2]);
    h(4, 3) = 1.0;
    h(5, 4) = 1.0;
    return h;
  };
  VectorXd zt = ref(env.horizon - 1);
  cost.terminal_target = zt.head(6);
  cost.terminal_weight = diag_mat({40.0, 40.0, 8.0, 8.0, 2.0, 2.0});
  env.cost = cost;

  env.init =
      Gaussian(VectorXd::Zero(6), MatrixXd(1e-6 * MatrixXd::Identity(6, 6)));
  env.input_prior_cov = diag_mat({1.0, 1.0});
  return env;
}

void set_quadcopter_high_noise(Environment& env) {
  // Masks the velocity channels and the right rotor position sensor.
  VectorXd d = env.sys.meas_noise.diagonal();
  d[2] = 1e6;
  d[3] = 1e6;
  d[4] = 1e6;
  d[5] = 1e6;
  d[6] = 1e6;
  d[7] = 1e6;
  env.sys.meas_noise = d.asDiagonal();
}

// ---------------------------------------------------------------------------
// Linear systems.
// ---------------------------------------------------------------------------

Environment make_linear2d() {
  MatrixXd a(2, 2), b(2, 1);
  a << 1.1, 0.2, 0.0, 1.08;
  b << 0.0, 1.0;
  Environment env;
  env.name = "linear2d";
  env.sys = make_affine_system(a, b, VectorXd::Zero(2), diag_mat({0.1, 0.1}),
                               "linear2d");
  env.horizon = 20;
  env.cost = quadratic_cost(diag_mat({1.0, 1.0}), diag_mat({1.0}),
                            VectorXd::Zero(2), VectorXd::Zero(1),
                            diag_mat({10.0, 10.0}), VectorXd::Zero(2));
  env.init = Gaussian(diag_vec({2.0, -1.0}), diag_mat({0.05, 0.05}));
  env.input_prior_cov = diag_mat({4.0});
  return env;
}

Environment make_double_integrator(double dt, double noise) {
  MatrixXd a(2, 2), b(2, 1);
  a << 1.0, dt, 0.0, 1.0;
  b << 0.5 * dt * dt, dt;
  Environment env;
  env.name = "double_integrator";
  env.sys = make_affine_system(a, b, VectorXd::Zero(2),
                               MatrixXd(noise * MatrixXd::Identity(2, 2)),
                               "double_integrator");
  env.horizon = 50;
  env.cost = quadratic_cost(diag_mat({1.0, 0.1}), diag_mat({0.1}),
                            VectorXd::Zero(2), VectorXd::Zero(1),
                            diag_mat({10.0, 1.0}), VectorXd::Zero(2));
  env.init = Gaussian(diag_vec({1.0, 0.0}), diag_mat({1e-6, 1e-6}));
  env.input_prior_cov = diag_mat({4.0});
  return env;
}

// ---------------------------------------------------------------------------
// Registry.
// ---------------------------------------------------------------------------

namespace {

double get_double(const std::map<std::string, std::string>& m,
                  const std::string& key, double fallback) {
  auto it = m.find(key);
  if (it == m.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for '" + key + "': " + it->second);
  }
}

void check_keys(const std::map<std::string, std::string>& m,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : m) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw ConfigError("unknown environment key '" + key + "'");
  }
}

void apply_common(Environment& env,
                  const std::map<std::string, std::string>& m) {
  env.horizon = static_cast<int>(get_double(m, "horizon", env.horizon));
  if (env.horizon < 2) throw ConfigError("horizon must be >= 2");
  const double noise_scale = get_double(m, "noise_scale", 1.0);
  env.sys.process_noise *= noise_scale;
}

}  // namespace

Environment make_environment(const std::string& name,
                             const std::map<std::string, std::string>& overrides) {
  Environment env;
  if (name == "pendulum") {
    check_keys(overrides, {"horizon", "noise_scale", "mass", "length",
                           "damping", "dt", "u_max"});
    PendulumParams p;
    p.mass = get_double(overrides, "mass", p.mass);
    p.length = get_double(overrides, "length", p.length);
    p.damping = get_double(overrides, "damping", p.damping);
    p.dt = get_double(overrides, "dt", p.dt);
    p.u_max = get_double(overrides, "u_max", p.u_max);
    env = make_pendulum(p);
  } else if (name == "cartpole") {
    check_keys(overrides, {"horizon", "noise_scale", "cart_mass", "pole_mass",
                           "length", "dt", "u_max"});
    CartpoleParams p;
    p.cart_mass = get_double(overrides, "cart_mass", p.cart_mass);
    p.pole_mass = get_double(overrides, "pole_mass", p.pole_mass);
    p.length = get_double(overrides, "length", p.length);
    p.dt = get_double(overrides, "dt", p.dt);
    p.u_max = get_double(overrides, "u_max", p.u_max);
    env = make_cartpole(p);
  } else if (name == "double_cartpole") {
    check_keys(overrides, {"horizon", "noise_scale", "dt", "u_max"});
    DoubleCartpoleParams p;
    p.dt = get_double(overrides, "dt", p.dt);
    p.u_max = get_double(overrides, "u_max", p.u_max);
    env = make_double_cartpole(p);
  } else if (name == "quadcopter") {
    check_keys(overrides, {"horizon", "noise_scale", "path", "measurement"});
    QuadcopterParams p;
    std::vector<PathPoint> path;
    auto it = overrides.find("path");
    path = (it != overrides.end()) ? load_path_csv(it->second)
                                   : default_quadcopter_path();
    env = make_quadcopter(path, p);
    auto mit = overrides.find("measurement");
    if (mit != overrides.end()) {
      if (mit->second == "high")
        set_quadcopter_high_noise(env);
      else if (mit->second != "low")
        throw ConfigError("measurement must be 'low' or 'high'");
    }
  } else if (name == "linear2d") {
    check_keys(overrides, {"horizon", "noise_scale"});
    env = make_linear2d();
  } else if (name == "double_integrator") {
    check_keys(overrides, {"horizon", "noise_scale", "dt"});
    env = make_double_integrator(get_double(overrides, "dt", 0.1));
  } else {
    throw ConfigError("unknown environment '" + name + "'");
  }
  apply_common(env, overrides);
  return env;
}

}  // namespace i2c
