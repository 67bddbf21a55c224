#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hybridcal/cli.h"
#include "hybridcal/epipolar.h"
#include "hybridcal/error.h"
#include "hybridcal/geometry.h"
#include "hybridcal/matching.h"
#include "hybridcal/triangulation.h"

namespace py = pybind11;
using namespace hybridcal;

namespace {

using PointArray = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

std::vector<Correspondence> pairs(const PointArray& x1, const PointArray& x2) {
  if (x1.rows() != x2.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "x1 and x2 differ in length");
  }
  std::vector<Correspondence> out;
  out.reserve(x1.rows());
  for (Eigen::Index i = 0; i < x1.rows(); ++i) {
    out.push_back({x1.row(i).transpose(), x2.row(i).transpose()});
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_hybridcal, m) {
  m.doc() = "Hybrid stereo rig calibration";

  static py::exception<Error> error(m, "HybridcalError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      exc.attr("code") = std::string(e.name());
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<RigidTransform>(m, "RigidTransform")
      .def(py::init<>())
      .def(py::init([](const Matrix3& r, const Vector3& t) {
             return RigidTransform::from_approximate(r, t);
           }),
           py::arg("rotation"), py::arg("translation"))
      .def_property_readonly("rotation", &RigidTransform::rotation)
      .def_property_readonly("translation", &RigidTransform::translation)
      .def("apply", &RigidTransform::apply)
      .def("matrix", &RigidTransform::matrix4x4)
      .def("inverse", [](const RigidTransform& t) { return invert(t); })
      .def("__matmul__", [](const RigidTransform& a, const RigidTransform& b) {
        return compose(a, b);
      });

  py::class_<CameraModel>(m, "CameraModel")
      .def(py::init<double, double, double, double, const std::array<double, 3>&,
                    int, int>(),
           py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"),
           py::arg("kappa") = std::array<double, 3>{0, 0, 0}, py::arg("width"),
           py::arg("height"))
      .def_property_readonly("K", &CameraModel::K)
      .def_property_readonly("kappa", &CameraModel::kappa)
      .def("project", [](const CameraModel& c, const RigidTransform& pose,
                         const Vector3& x) { return project(c, pose, x); })
      .def("undistort_pixel", &CameraModel::undistort_pixel);

  m.def("rotation_from_axis_angle", &rotation_from_axis_angle);
  m.def("rotation_angle_between", &rotation_angle_between);

  m.def(
      "eight_point",
      [](const PointArray& x1, const PointArray& x2) {
        return eight_point(pairs(x1, x2)).matrix();
      },
      py::arg("x1"), py::arg("x2"));
  m.def(
      "fundamental_from_calibration",
      [](const Matrix3& k1, const Matrix3& k2, const RigidTransform& rel) {
        return fundamental_from_calibration(k1, k2, rel).matrix();
      },
      py::arg("K1"), py::arg("K2"), py::arg("relative"));
  m.def(
      "sampson_distance",
      [](const Matrix3& f, const PixelPoint& x1, const PixelPoint& x2) {
        return sampson_distance(f, {x1, x2});
      },
      py::arg("F"), py::arg("x1"), py::arg("x2"));
  m.def(
      "ransac_fundamental",
      [](const PointArray& x1, const PointArray& x2, double threshold,
         std::uint64_t seed) {
        RansacConfig cfg;
        cfg.threshold = threshold;
        cfg.seed = seed;
        const RansacResult r = ransac_fundamental(pairs(x1, x2), cfg);
        return py::make_tuple(r.F.matrix(), r.inliers);
      },
      py::arg("x1"), py::arg("x2"), py::arg("threshold") = 1.0,
      py::arg("seed") = 0);
  m.def(
      "recover_pose",
      [](const PointArray& x1, const PointArray& x2, const Matrix3& k1,
         const Matrix3& k2) {
        const std::vector<Correspondence> corrs = pairs(x1, x2);
        return recover_pose(eight_point(corrs), k1, k2, corrs).transform();
      },
      py::arg("x1"), py::arg("x2"), py::arg("K1"), py::arg("K2"));
  m.def(
      "triangulate",
      [](const Matrix3& k1, const RigidTransform& pose1, const Matrix3& k2,
         const RigidTransform& pose2, const PixelPoint& x1, const PixelPoint& x2) {
        return triangulate_point(ProjectionMatrix(k1, pose1),
                                 ProjectionMatrix(k2, pose2), x1, x2);
      },
      py::arg("K1"), py::arg("pose1"), py::arg("K2"), py::arg("pose2"),
      py::arg("x1"), py::arg("x2"));
  m.def(
      "match_descriptors",
      [](const Eigen::MatrixXd& da, const PointArray& ka, const Eigen::MatrixXd& db,
         const PointArray& kb, double tau) {
        DescriptorSet a{da, {}};
        DescriptorSet b{db, {}};
        for (Eigen::Index i = 0; i < ka.rows(); ++i) a.keypoints.push_back(ka.row(i));
        for (Eigen::Index i = 0; i < kb.rows(); ++i) b.keypoints.push_back(kb.row(i));
        std::vector<std::pair<PixelPoint, PixelPoint>> out;
        for (const Correspondence& c : match_descriptors(a, b, tau)) {
          out.emplace_back(c.x1, c.x2);
        }
        return out;
      },
      py::arg("descriptors_a"), py::arg("keypoints_a"), py::arg("descriptors_b"),
      py::arg("keypoints_b"), py::arg("tau") = 0.8);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"hybridcal-cli"};
        for (const std::string& a : args) argv.push_back(a.c_str());
        std::ostringstream out;
        std::ostringstream err;
        const int code =
            run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"),
      "Runs a CLI command in process and returns (exit code, stdout, stderr).");
}
