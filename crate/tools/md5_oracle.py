#!/usr/bin/env python3
"""Independent md5sum oracle for the supported ROS1 message set.

Each type's md5 text is written out by hand below (constants first, builtin
fields as "type name", embedded message types replaced by their md5) and
hashed with hashlib. Prints `type md5` lines.
"""
import hashlib

DEFS = {
    "geometry_msgs/Vector3": ["float64 x", "float64 y", "float64 z"],
    "geometry_msgs/Point": ["float64 x", "float64 y", "float64 z"],
    "geometry_msgs/Quaternion": ["float64 x", "float64 y", "float64 z", "float64 w"],
    "std_msgs/Header": ["uint32 seq", "time stamp", "string frame_id"],
    "geometry_msgs/Pose": ["{geometry_msgs/Point} position", "{geometry_msgs/Quaternion} orientation"],
    "geometry_msgs/PoseWithCovariance": ["{geometry_msgs/Pose} pose", "float64[36] covariance"],
    "geometry_msgs/Twist": ["{geometry_msgs/Vector3} linear", "{geometry_msgs/Vector3} angular"],
    "geometry_msgs/TwistWithCovariance": ["{geometry_msgs/Twist} twist", "float64[36] covariance"],
    "nav_msgs/MapMetaData": [
        "time map_load_time", "float32 resolution", "uint32 width", "uint32 height",
        "{geometry_msgs/Pose} origin",
    ],
    "nav_msgs/OccupancyGrid": ["{std_msgs/Header} header", "{nav_msgs/MapMetaData} info", "int8[] data"],
    "nav_msgs/Odometry": [
        "{std_msgs/Header} header", "string child_frame_id",
        "{geometry_msgs/PoseWithCovariance} pose", "{geometry_msgs/TwistWithCovariance} twist",
    ],
    "rosgraph_msgs/Log": [
        "byte DEBUG=1", "byte INFO=2", "byte WARN=4", "byte ERROR=8", "byte FATAL=16",
        "{std_msgs/Header} header", "byte level", "string name", "string msg", "string file",
        "string function", "uint32 line", "string[] topics",
    ],
}

_cache = {}


def md5(name):
    if name in _cache:
        return _cache[name]
    lines = []
    for line in DEFS[name]:
        if line.startswith("{"):
            dep, field = line[1:].split("} ")
            lines.append(md5(dep) + " " + field)
        else:
            lines.append(line)
    digest = hashlib.md5("\n".join(lines).encode()).hexdigest()
    _cache[name] = digest
    return digest


if __name__ == "__main__":
    for n in DEFS:
        print(n, md5(n))
