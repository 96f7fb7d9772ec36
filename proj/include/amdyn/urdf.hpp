#pragma once

// URDF subset -> kinematic tree of link, joint and body nodes.
//
// Supported: <robot>, <link> with <inertial> (origin, mass, inertia), and
// <joint> of type revolute, continuous or fixed (origin, axis, parent, child,
// optional limit). <visual> and <collision> are skipped with a warning.
//
// The link inertial origin is the constant link -> body transform.

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "amdyn/common.hpp"
#include "amdyn/quat.hpp"

namespace amdyn {

/// Rigid transform (rotation, translation) mapping child-frame points into the parent frame.
struct HomTransform {
  Mat3d rotation{Mat3d::Identity()};
  Vec3d translation{Vec3d::Zero()};

  static HomTransform identity() { return {}; }

  /// URDF origin: fixed-axis roll-pitch-yaw, R = Rz(yaw) Ry(pitch) Rx(roll).
  static HomTransform from_xyz_rpy(const Vec3d& xyz, const Vec3d& rpy) {
    HomTransform t;
    t.rotation = rodrigues(rpy[2], Vec3d::UnitZ()) * rodrigues(rpy[1], Vec3d::UnitY()) *
                 rodrigues(rpy[0], Vec3d::UnitX());
    t.translation = xyz;
    return t;
  }

  Vec3d rpy() const {
    const Mat3d& r = rotation;
    const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
    double roll, yaw;
    if (std::abs(std::cos(pitch)) > 1e-12) {
      roll = std::atan2(r(2, 1), r(2, 2));
      yaw = std::atan2(r(1, 0), r(0, 0));
    } else {
      roll = 0.0;
      yaw = std::atan2(-r(0, 1), r(1, 1));
    }
    return {roll + 0.0, pitch + 0.0, yaw + 0.0};  // no negative zeros in output
  }

  HomTransform operator*(const HomTransform& o) const {
    return {rotation * o.rotation, rotation * o.translation + translation};
  }
  Vec3d apply(const Vec3d& p) const { return rotation * p + translation; }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = rotation;
    m.block<3, 1>(0, 3) = translation;
    return m;
  }
};

/// Pose of a frame in the base-link frame, generic over the scalar type.
template <class T>
struct Pose {
  Mat3<T> R{Mat3<T>::Identity()};
  Vec3<T> p{Vec3<T>::Zero()};

  Pose compose(const Pose& child) const { return {R.lazyProduct(child.R), R.lazyProduct(child.p) + p}; }
};

enum class NodeKind { Link, Joint, Body };
enum class JointType { Revolute, Continuous, Fixed };

struct JointLimits {
  double lower = 0.0;
  double upper = 0.0;
  double effort = 0.0;
  double velocity = 0.0;
};

struct TreeNode {
  NodeKind kind = NodeKind::Link;
  std::string name;
  int parent = -1;
  std::vector<int> children;
  HomTransform local;  // static part of the parent -> node transform

  // joints
  JointType joint_type = JointType::Fixed;
  Vec3d axis{1.0, 0.0, 0.0};
  std::optional<JointLimits> limits;
  int joint_index = -1;  // index into θ, -1 for fixed joints

  // bodies
  double mass = 0.0;
  Mat3d inertia{Mat3d::Zero()};
  int body_index = -1;
};

inline const char* to_string(JointType t) {
  switch (t) {
    case JointType::Revolute: return "revolute";
    case JointType::Continuous: return "continuous";
    case JointType::Fixed: return "fixed";
  }
  return "fixed";
}

class KinematicTree {
 public:
  const std::string& name() const { return name_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) throw LookupError("unknown node id " + std::to_string(id));
    return nodes_[static_cast<std::size_t>(id)];
  }
  int base_link() const { return 0; }

  /// Movable joints in θ order (URDF document order).
  const std::vector<int>& joints() const { return joints_; }
  /// Body nodes, base body first, then URDF link document order.
  const std::vector<int>& bodies() const { return bodies_; }
  /// Link nodes in document order, fixed joints included in `all_joints`.
  const std::vector<int>& links() const { return links_; }
  const std::vector<int>& all_joints() const { return all_joints_; }

  int num_joints() const { return static_cast<int>(joints_.size()); }
  int num_bodies() const { return static_cast<int>(bodies_.size()); }
  double total_mass() const {
    double m = 0.0;
    for (int b : bodies_) m += nodes_[static_cast<std::size_t>(b)].mass;
    return m;
  }

  const std::vector<std::string>& warnings() const { return warnings_; }

  int find(const std::string& name, NodeKind kind) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].kind == kind && nodes_[i].name == name) return static_cast<int>(i);
    throw LookupError("no node named '" + name + "'");
  }

  /// Node ids from `id` up to and including the base link.
  std::vector<int> parent_chain(int id) const {
    node(id);
    std::vector<int> chain;
    for (int n = id; n >= 0; n = nodes_[static_cast<std::size_t>(n)].parent) chain.push_back(n);
    return chain;
  }

  /// True when movable joint node `joint` lies on the chain of `id`.
  bool is_ancestor(int joint, int id) const {
    for (int n = id; n >= 0; n = nodes_[static_cast<std::size_t>(n)].parent)
      if (n == joint) return true;
    return false;
  }

 private:
  friend KinematicTree parse_urdf(const std::string&);
  std::string name_;
  std::vector<TreeNode> nodes_;
  std::vector<int> joints_, bodies_, links_, all_joints_;
  std::vector<std::string> warnings_;
};

namespace detail {

namespace pt = boost::property_tree;

inline std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const std::string& what) {
  std::istringstream is(text);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError("invalid number '" + tok + "' in " + what);
    }
  }
  if (out.size() != expected)
    throw ParseError(what + ": expected " + std::to_string(expected) + " numbers, got " + std::to_string(out.size()));
  return out;
}

inline Vec3d attr_vec3(const pt::ptree& elem, const std::string& key, const Vec3d& fallback, const std::string& what) {
  auto a = elem.get_optional<std::string>("<xmlattr>." + key);
  if (!a) return fallback;
  auto v = parse_numbers(*a, 3, what + " " + key);
  return {v[0], v[1], v[2]};
}

inline double attr_number(const pt::ptree& elem, const std::string& key, const std::string& what) {
  auto a = elem.get_optional<std::string>("<xmlattr>." + key);
  if (!a) throw ValidationError(what + ": missing attribute '" + key + "'");
  return parse_numbers(*a, 1, what + " " + key)[0];
}

inline HomTransform parse_origin(const pt::ptree& parent, const std::string& what) {
  auto o = parent.get_child_optional("origin");
  if (!o) return HomTransform::identity();
  return HomTransform::from_xyz_rpy(attr_vec3(*o, "xyz", Vec3d::Zero(), what + " origin"),
                                    attr_vec3(*o, "rpy", Vec3d::Zero(), what + " origin"));
}

inline void check_inertia(const Mat3d& inertia, const std::string& link) {
  if (!inertia.allFinite() || (inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ValidationError("link '" + link + "': inertia tensor is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3d> es(inertia);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw ValidationError("link '" + link + "': inertia tensor is not positive definite");
}

struct RawLink {
  std::string name;
  std::optional<HomTransform> inertial_origin;
  double mass = 0.0;
  Mat3d inertia{Mat3d::Zero()};
};

struct RawJoint {
  std::string name, type, parent, child;
  HomTransform origin;
  Vec3d axis{1.0, 0.0, 0.0};
  std::optional<JointLimits> limits;
};

}  // namespace detail

/// Parses URDF text into a validated kinematic tree.
inline KinematicTree parse_urdf(const std::string& xml_text) {
  namespace pt = boost::property_tree;
  pt::ptree doc;
  try {
    std::istringstream is(xml_text);
    pt::read_xml(is, doc, pt::xml_parser::no_comments);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("malformed XML: " + e.message(), e.line());
  }
  auto robot = doc.get_child_optional("robot");
  if (!robot) throw ParseError("missing <robot> root element");

  KinematicTree tree;
  tree.name_ = robot->get<std::string>("<xmlattr>.name", "robot");

  std::vector<detail::RawLink> links;
  std::vector<detail::RawJoint> joints;
  for (const auto& [tag, elem] : *robot) {
    if (tag == "link") {
      detail::RawLink l;
      l.name = elem.get<std::string>("<xmlattr>.name", "");
      if (l.name.empty()) throw ValidationError("link without a name");
      for (const auto& [sub, _] : elem)
        if (sub == "visual" || sub == "collision")
          tree.warnings_.push_back("link '" + l.name + "': <" + sub + "> ignored");
      if (auto in = elem.get_child_optional("inertial")) {
        const std::string what = "link '" + l.name + "' inertial";
        l.inertial_origin = detail::parse_origin(*in, what);
        auto m = in->get_child_optional("mass");
        if (!m) throw ValidationError(what + ": missing <mass>");
        l.mass = detail::attr_number(*m, "value", what + " mass");
        auto i = in->get_child_optional("inertia");
        if (!i) throw ValidationError(what + ": missing <inertia>");
        const double ixx = detail::attr_number(*i, "ixx", what), ixy = detail::attr_number(*i, "ixy", what),
                     ixz = detail::attr_number(*i, "ixz", what), iyy = detail::attr_number(*i, "iyy", what),
                     iyz = detail::attr_number(*i, "iyz", what), izz = detail::attr_number(*i, "izz", what);
        l.inertia << ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz;
      }
      links.push_back(std::move(l));
    } else if (tag == "joint") {
      detail::RawJoint j;
      j.name = elem.get<std::string>("<xmlattr>.name", "");
      j.type = elem.get<std::string>("<xmlattr>.type", "");
      const std::string what = "joint '" + j.name + "'";
      if (j.type != "revolute" && j.type != "continuous" && j.type != "fixed")
        throw UnsupportedFeature(what + ": unsupported joint type '" + j.type + "'");
      j.parent = elem.get<std::string>("parent.<xmlattr>.link", "");
      j.child = elem.get<std::string>("child.<xmlattr>.link", "");
      if (j.parent.empty() || j.child.empty()) throw StructureError(what + ": missing parent or child link");
      j.origin = detail::parse_origin(elem, what);
      if (auto ax = elem.get_child_optional("axis")) j.axis = detail::attr_vec3(*ax, "xyz", j.axis, what + " axis");
      const double n = j.axis.norm();
      if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError(what + ": zero joint axis");
      j.axis /= n;
      if (auto lim = elem.get_child_optional("limit")) {
        JointLimits l;
        l.lower = lim->get<double>("<xmlattr>.lower", 0.0);
        l.upper = lim->get<double>("<xmlattr>.upper", 0.0);
        l.effort = lim->get<double>("<xmlattr>.effort", 0.0);
        l.velocity = lim->get<double>("<xmlattr>.velocity", 0.0);
        if (j.type != "continuous") j.limits = l;
      }
      joints.push_back(std::move(j));
    } else if (tag != "<xmlattr>") {
      tree.warnings_.push_back("element <" + tag + "> ignored");
    }
  }

  // structure checks
  std::map<std::string, std::size_t> link_index;
  for (std::size_t i = 0; i < links.size(); ++i)
    if (!link_index.emplace(links[i].name, i).second) throw StructureError("duplicate link '" + links[i].name + "'");
  std::set<std::string> joint_names;
  std::map<std::string, std::size_t> parent_joint_of;  // child link -> joint
  std::map<std::string, std::vector<std::size_t>> joints_of;  // parent link -> joints
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const auto& jt = joints[j];
    if (!joint_names.insert(jt.name).second) throw StructureError("duplicate joint '" + jt.name + "'");
    if (!link_index.count(jt.parent))
      throw StructureError("joint '" + jt.name + "': parent link '" + jt.parent + "' does not exist");
    if (!link_index.count(jt.child))
      throw StructureError("joint '" + jt.name + "': child link '" + jt.child + "' does not exist");
    if (!parent_joint_of.emplace(jt.child, j).second)
      throw StructureError("link '" + jt.child + "' has more than one parent joint");
    joints_of[jt.parent].push_back(j);
  }
  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < links.size(); ++i)
    if (!parent_joint_of.count(links[i].name)) roots.push_back(i);
  if (links.empty()) throw StructureError("robot has no links");
  if (roots.size() != 1)
    throw StructureError(roots.empty() ? "no base link (kinematic loop)" : "multiple root links");

  for (const auto& l : links) {
    if (!l.inertial_origin) throw ValidationError("link '" + l.name + "': missing <inertial>");
    if (!(l.mass > 0.0) || !std::isfinite(l.mass)) throw ValidationError("link '" + l.name + "': mass must be positive");
    detail::check_inertia(l.inertia, l.name);
  }

  // depth-first construction; parents always precede children
  std::map<std::string, int> link_node;
  std::vector<int> joint_node(joints.size(), -1);
  auto add_node = [&](TreeNode n) {
    const int id = static_cast<int>(tree.nodes_.size());
    if (n.parent >= 0) tree.nodes_[static_cast<std::size_t>(n.parent)].children.push_back(id);
    tree.nodes_.push_back(std::move(n));
    return id;
  };
  std::vector<std::pair<std::size_t, int>> stack{{roots.front(), -1}};
  while (!stack.empty()) {
    auto [li, parent] = stack.back();
    stack.pop_back();
    const auto& raw = links[li];
    TreeNode ln;
    ln.kind = NodeKind::Link;
    ln.name = raw.name;
    ln.parent = parent;
    const int lid = add_node(std::move(ln));
    link_node[raw.name] = lid;
    TreeNode bn;
    bn.kind = NodeKind::Body;
    bn.name = raw.name + "/inertial";
    bn.parent = lid;
    bn.local = *raw.inertial_origin;
    bn.mass = raw.mass;
    bn.inertia = raw.inertia;
    add_node(std::move(bn));
    auto it = joints_of.find(raw.name);
    if (it == joints_of.end()) continue;
    // push in reverse so children are visited in document order
    std::vector<std::pair<std::size_t, int>> pending;
    for (std::size_t j : it->second) {
      const auto& rj = joints[j];
      TreeNode jn;
      jn.kind = NodeKind::Joint;
      jn.name = rj.name;
      jn.parent = lid;
      jn.local = rj.origin;
      jn.axis = rj.axis;
      jn.limits = rj.limits;
      jn.joint_type = rj.type == "revolute" ? JointType::Revolute
                      : rj.type == "continuous" ? JointType::Continuous
                                                : JointType::Fixed;
      joint_node[j] = add_node(std::move(jn));
      pending.emplace_back(link_index.at(rj.child), joint_node[j]);
    }
    for (auto p = pending.rbegin(); p != pending.rend(); ++p) stack.push_back(*p);
  }
  if (link_node.size() != links.size()) throw StructureError("kinematic loop: some links are unreachable from the base");

  for (std::size_t j = 0; j < joints.size(); ++j) {
    auto& n = tree.nodes_[static_cast<std::size_t>(joint_node[j])];
    tree.all_joints_.push_back(joint_node[j]);
    if (n.joint_type != JointType::Fixed) {
      n.joint_index = static_cast<int>(tree.joints_.size());
      tree.joints_.push_back(joint_node[j]);
    }
  }
  tree.bodies_.push_back(1);  // body of the base link
  for (const auto& l : links) {
    tree.links_.push_back(link_node.at(l.name));
    const int body = link_node.at(l.name) + 1;
    if (body != 1) tree.bodies_.push_back(body);
  }
  for (std::size_t b = 0; b < tree.bodies_.size(); ++b)
    tree.nodes_[static_cast<std::size_t>(tree.bodies_[b])].body_index = static_cast<int>(b);
  return tree;
}

inline KinematicTree load_urdf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open URDF file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_urdf(ss.str());
}

/// Serializes the tree back to URDF (17 significant digits).
inline std::string to_urdf(const KinematicTree& tree) {
  std::ostringstream os;
  os.precision(17);
  auto v3 = [&](const Vec3d& v) {
    std::ostringstream s;
    s.precision(17);
    s << v[0] << ' ' << v[1] << ' ' << v[2];
    return s.str();
  };
  os << "<?xml version=\"1.0\"?>\n<robot name=\"" << tree.name() << "\">\n";
  for (int lid : tree.links()) {
    const auto& l = tree.node(lid);
    const auto& b = tree.node(lid + 1);
    os << "  <link name=\"" << l.name << "\">\n    <inertial>\n"
       << "      <origin xyz=\"" << v3(b.local.translation) << "\" rpy=\"" << v3(b.local.rpy()) << "\"/>\n"
       << "      <mass value=\"" << b.mass << "\"/>\n"
       << "      <inertia ixx=\"" << b.inertia(0, 0) << "\" ixy=\"" << b.inertia(0, 1) << "\" ixz=\""
       << b.inertia(0, 2) << "\" iyy=\"" << b.inertia(1, 1) << "\" iyz=\"" << b.inertia(1, 2) << "\" izz=\""
       << b.inertia(2, 2) << "\"/>\n    </inertial>\n  </link>\n";
  }
  for (int jid : tree.all_joints()) {
    const auto& j = tree.node(jid);
    const auto& child = tree.node(j.children.front());
    os << "  <joint name=\"" << j.name << "\" type=\"" << to_string(j.joint_type) << "\">\n"
       << "    <parent link=\"" << tree.node(j.parent).name << "\"/>\n"
       << "    <child link=\"" << child.name << "\"/>\n"
       << "    <origin xyz=\"" << v3(j.local.translation) << "\" rpy=\"" << v3(j.local.rpy()) << "\"/>\n"
       << "    <axis xyz=\"" << v3(j.axis) << "\"/>\n";
    if (j.limits)
      os << "    <limit lower=\"" << j.limits->lower << "\" upper=\"" << j.limits->upper << "\" effort=\""
         << j.limits->effort << "\" velocity=\"" << j.limits->velocity << "\"/>\n";
    os << "  </joint>\n";
  }
  os << "</robot>\n";
  return os.str();
}

/// Static-or-moving local transform of a node as a pose in its parent frame.
template <class T>
Pose<T> local_pose(const KinematicTree& tree, int id, const VecX<T>& theta) {
  const TreeNode& n = tree.node(id);
  Pose<T> out;
  if (n.kind == NodeKind::Link && n.parent >= 0) {
    const TreeNode& j = tree.node(n.parent);
    if (j.joint_index >= 0) {
      const Vec3<T> axis = j.axis.template cast<T>();
      out.R = rodrigues_unchecked<T>(theta[j.joint_index], axis);
    }
    return out;
  }
  out.R = n.local.rotation.template cast<T>();
  out.p = n.local.translation.template cast<T>();
  return out;
}

/// Poses of every node in the base-link frame.
template <class T>
std::vector<Pose<T>> node_poses(const KinematicTree& tree, const VecX<T>& theta) {
  if (theta.size() != tree.num_joints())
    throw DimensionError("joint vector has " + std::to_string(theta.size()) + " entries, expected " +
                         std::to_string(tree.num_joints()));
  std::vector<Pose<T>> poses(tree.nodes().size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const int parent = tree.nodes()[i].parent;
    const Pose<T> local = local_pose<T>(tree, static_cast<int>(i), theta);
    poses[i] = parent < 0 ? local : poses[static_cast<std::size_t>(parent)].compose(local);
  }
  return poses;
}

/// Product of the local transforms along parent_chain(node).
inline HomTransform compose_transform(const KinematicTree& tree, int node, const VecXd& theta) {
  if (theta.size() != tree.num_joints())
    throw DimensionError("joint vector has " + std::to_string(theta.size()) + " entries, expected " +
                         std::to_string(tree.num_joints()));
  const auto chain = tree.parent_chain(node);
  Pose<double> acc;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) acc = acc.compose(local_pose<double>(tree, *it, theta));
  return {acc.R, acc.p};
}

}  // namespace amdyn
