"""Kinematic-tree description: links, joints, selection matrices, inertia.

The model document is JSON with top-level fields ``name``, ``links``,
``joints`` and ``root``.  Angles are radians, lengths meters, masses
kilograms.  Unknown fields are rejected so typos fail loudly.
"""

import json

import numpy as np

from .spatial import SpatialTransform, se3_exp, skew3, so3_exp

REVOLUTE = "revolute"
PRISMATIC = "prismatic"
SPHERICAL = "spherical"
FLOATING = "floating"

_JOINT_DOF = {REVOLUTE: 1, PRISMATIC: 1, SPHERICAL: 3, FLOATING: 6}


class ModelError(ValueError):
    """Raised for malformed or inconsistent model documents."""


def joint_dof(jtype):
    try:
        return _JOINT_DOF[jtype]
    except KeyError:
        raise ModelError(f"unknown joint type {jtype!r}") from None


def selection_matrix(jtype, axis=None):
    """Map joint coordinate rates to the joint's spatial velocity.

    revolute -> [e_j; 0], prismatic -> [0; e_j], spherical -> the 6x3
    angular selector, floating -> I6.  axis is 1, 2 or 3 and is required
    exactly for the single-dof types.
    """
    if jtype in (REVOLUTE, PRISMATIC):
        if axis not in (1, 2, 3):
            raise ModelError(f"{jtype} joint needs axis index in {{1,2,3}}, got {axis!r}")
        e = np.zeros(3)
        e[axis - 1] = 1.0
        col = np.zeros((6, 1))
        if jtype == REVOLUTE:
            col[:3, 0] = e
        else:
            col[3:, 0] = e
        return col
    if axis is not None:
        raise ModelError(f"{jtype} joint takes no axis index")
    if jtype == SPHERICAL:
        s = np.zeros((6, 3))
        s[:3, :] = np.eye(3)
        return s
    if jtype == FLOATING:
        return np.eye(6)
    raise ModelError(f"unknown joint type {jtype!r}")


def comprehensive_selection(s, n_blocks):
    """Block-diagonal repetition of a selection matrix."""
    return np.kron(np.eye(n_blocks), s)


def rpy_matrix(rpy):
    """Rotation from roll-pitch-yaw: Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    r, p, y = rpy
    return so3_exp([0, 0, y]) @ so3_exp([0, p, 0]) @ so3_exp([r, 0, 0])


def joint_motion(jtype, axis, q):
    """Transform generated by the joint coordinates.

    Single-dof joints move along/about the axis unit vector; spherical
    and floating joints treat q as a Lie-algebra increment from the
    joint's zero configuration.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if jtype == REVOLUTE:
        e = np.zeros(3)
        e[axis - 1] = q[0]
        return SpatialTransform(so3_exp(e), np.zeros(3), check=False)
    if jtype == PRISMATIC:
        p = np.zeros(3)
        p[axis - 1] = q[0]
        return SpatialTransform(np.eye(3), p, check=False)
    if jtype == SPHERICAL:
        return SpatialTransform(so3_exp(q), np.zeros(3), check=False)
    if jtype == FLOATING:
        return se3_exp(q)
    raise ModelError(f"unknown joint type {jtype!r}")


class LinkSpec:
    """Mass, center of mass, and rotational inertia of one link.

    The six inertia components (Ixx, Iyy, Izz, Ixy, Ixz, Iyz) are the
    tensor about the center of mass in link-frame axes; the spatial
    inertia assembly applies the parallel-axis shift to the frame origin.
    """

    __slots__ = ("name", "mass", "com", "inertia")

    def __init__(self, name, mass, com, inertia):
        if mass <= 0:
            raise ModelError(f"link {name!r}: mass must be positive, got {mass}")
        self.name = name
        self.mass = float(mass)
        self.com = np.asarray(com, dtype=float)
        self.inertia = np.asarray(inertia, dtype=float)
        if self.com.shape != (3,) or self.inertia.shape != (6,):
            raise ModelError(f"link {name!r}: com must have 3 entries and inertia 6")


class JointSpec:
    """Connection between a parent and child link with a fixed offset."""

    __slots__ = ("name", "parent", "child", "jtype", "axis", "origin")

    def __init__(self, name, parent, child, jtype, axis, origin):
        self.name = name
        self.parent = parent
        self.child = child
        self.jtype = jtype
        self.axis = axis
        self.origin = origin
        selection_matrix(jtype, axis)  # validates the type/axis pairing

    @property
    def dof(self):
        return joint_dof(self.jtype)

    def selection(self):
        return selection_matrix(self.jtype, self.axis)

    def motion(self, q):
        """Parent-to-child transform at coordinates q (fixed offset first)."""
        return self.origin.compose(joint_motion(self.jtype, self.axis, q))


def spatial_inertia(link):
    """6x6 spatial inertia about the link-frame origin.

    [[I_com + m cx cx^T, m cx], [m cx^T, m I3]] with cx = skew3(com);
    symmetric positive semidefinite by construction.
    """
    ixx, iyy, izz, ixy, ixz, iyz = link.inertia
    i_c = np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])
    cx = skew3(link.com)
    m = link.mass
    out = np.zeros((6, 6))
    out[:3, :3] = i_c + m * (cx @ cx.T)
    out[:3, 3:] = m * cx
    out[3:, :3] = m * cx.T
    out[3:, 3:] = m * np.eye(3)
    return out


class RobotModel:
    """Validated kinematic tree with precomputed index sets.

    Moving links are indexed topologically (parents first); joint i is
    the joint whose child is moving link i.  The root link is the fixed
    base and carries no joint.
    """

    def __init__(self, name, links, joints, root):
        self.name = name
        self.links = {l.name: l for l in links}
        if root not in self.links:
            raise ModelError(f"root link {root!r} not among the links")
        self.root = root

        by_child = {}
        for j in joints:
            if j.parent not in self.links:
                raise ModelError(f"joint {j.name!r}: unknown parent link {j.parent!r}")
            if j.child not in self.links:
                raise ModelError(f"joint {j.name!r}: unknown child link {j.child!r}")
            if j.child == self.root:
                raise ModelError(f"joint {j.name!r}: root link cannot be a joint child")
            if j.child in by_child:
                raise ModelError(f"link {j.child!r} has two parent joints")
            by_child[j.child] = j
        for name in self.links:
            if name != root and name not in by_child:
                raise ModelError(f"link {name!r} is not connected to the tree")

        # walk each link toward the root; revisiting a link means a cycle
        order = []
        placed = {root}
        for child, joint in by_child.items():
            chain = []
            cur = child
            seen = set()
            while cur != root:
                if cur in seen:
                    raise ModelError(f"cycle detected at joint {by_child[cur].name!r}")
                seen.add(cur)
                if cur not in by_child:
                    raise ModelError(f"link {cur!r} dangles without a path to the root")
                chain.append(cur)
                cur = by_child[cur].parent
            for name in reversed(chain):
                if name not in placed:
                    placed.add(name)
                    order.append(name)

        self.link_order = order                      # moving links, parents first
        self.joints = [by_child[name] for name in order]
        self.nb = len(order)
        self._index = {name: i for i, name in enumerate(order)}
        self.parent = np.array(
            [self._index.get(j.parent, -1) for j in self.joints], dtype=int
        )
        self._ancestors = []
        for i in range(self.nb):
            p = self.parent[i]
            self._ancestors.append(([] if p < 0 else self._ancestors[p] + [p]))
        self._children = [[] for _ in range(self.nb)]
        for i, p in enumerate(self.parent):
            if p >= 0:
                self._children[p].append(i)
        self._descendants = [None] * self.nb
        for i in reversed(range(self.nb)):
            acc = []
            for c in self._children[i]:
                acc.extend([c] + self._descendants[c])
            self._descendants[i] = acc
        self._inertia = [spatial_inertia(self.links[name]) for name in order]

    def index(self, link_name):
        return self._index[link_name]

    def ancestors(self, i):
        """Strict ancestors of moving link i (indices, root excluded)."""
        return list(self._ancestors[i])

    def descendants(self, i):
        return list(self._descendants[i])

    def children(self, i):
        return list(self._children[i])

    def link_inertia(self, i):
        return self._inertia[i]

    @property
    def dof(self):
        return sum(j.dof for j in self.joints)

    @property
    def joint_dims(self):
        return tuple(j.dof for j in self.joints)

    def is_single_dof(self):
        return all(j.dof == 1 for j in self.joints)


_LINK_FIELDS = {"id", "mass", "com", "inertia"}
_JOINT_FIELDS = {"id", "parent", "child", "type", "axis", "xyz", "rpy"}
_TOP_FIELDS = {"name", "links", "joints", "root"}


def _reject_unknown(d, allowed, where):
    extra = set(d) - allowed
    if extra:
        raise ModelError(f"unknown field(s) {sorted(extra)} in {where}")


def load_model(text):
    """Parse and validate a model document given as JSON text."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"model document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    _reject_unknown(doc, _TOP_FIELDS, "model document")
    for field in ("links", "joints", "root"):
        if field not in doc:
            raise ModelError(f"model document missing field {field!r}")

    links = []
    for entry in doc["links"]:
        _reject_unknown(entry, _LINK_FIELDS, f"link {entry.get('id')!r}")
        links.append(
            LinkSpec(entry["id"], entry["mass"], entry["com"], entry["inertia"])
        )

    joints = []
    for entry in doc["joints"]:
        _reject_unknown(entry, _JOINT_FIELDS, f"joint {entry.get('id')!r}")
        xyz = np.asarray(entry.get("xyz", [0.0, 0.0, 0.0]), dtype=float)
        rpy = entry.get("rpy", [0.0, 0.0, 0.0])
        try:
            origin = SpatialTransform(rpy_matrix(rpy), xyz)
        except ValueError as exc:
            raise ModelError(f"joint {entry.get('id')!r}: {exc}") from None
        joints.append(
            JointSpec(
                entry["id"],
                entry["parent"],
                entry["child"],
                entry["type"],
                entry.get("axis"),
                origin,
            )
        )

    return RobotModel(doc.get("name", "robot"), links, joints, doc["root"])


def load_model_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return load_model(fh.read())
