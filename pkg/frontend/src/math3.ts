/** Minimal 3-D helpers: vectors, rotation matrices, quaternions, DH chains. */

export type Vec3 = [number, number, number];
export type Mat3 = number[][]; // row-major 3x3
export type Quat = [number, number, number, number]; // [w, x, y, z]

export function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function scale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function norm(a: Vec3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

export function matIdentity(): Mat3 {
  return [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
  ];
}

export function matMul(a: Mat3, b: Mat3): Mat3 {
  const out = matIdentity();
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) {
      out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
    }
  }
  return out;
}

export function matVec(m: Mat3, v: Vec3): Vec3 {
  return [
    m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
    m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
    m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
  ];
}

/** Rotation about a unit axis by an angle (Rodrigues). */
export function rotationAbout(axis: Vec3, angle: number): Mat3 {
  const [x, y, z] = scale(axis, 1 / (norm(axis) || 1));
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const t = 1 - c;
  return [
    [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
    [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
    [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
  ];
}

/** Unit quaternion [w,x,y,z] (w >= 0) from a rotation matrix. */
export function matToQuat(m: Mat3): Quat {
  const tr = m[0][0] + m[1][1] + m[2][2];
  let w: number, x: number, y: number, z: number;
  if (tr > 0) {
    const s = Math.sqrt(tr + 1) * 2;
    w = s / 4;
    x = (m[2][1] - m[1][2]) / s;
    y = (m[0][2] - m[2][0]) / s;
    z = (m[1][0] - m[0][1]) / s;
  } else if (m[0][0] > m[1][1] && m[0][0] > m[2][2]) {
    const s = Math.sqrt(1 + m[0][0] - m[1][1] - m[2][2]) * 2;
    w = (m[2][1] - m[1][2]) / s;
    x = s / 4;
    y = (m[0][1] + m[1][0]) / s;
    z = (m[0][2] + m[2][0]) / s;
  } else if (m[1][1] > m[2][2]) {
    const s = Math.sqrt(1 + m[1][1] - m[0][0] - m[2][2]) * 2;
    w = (m[0][2] - m[2][0]) / s;
    x = (m[0][1] + m[1][0]) / s;
    y = s / 4;
    z = (m[1][2] + m[2][1]) / s;
  } else {
    const s = Math.sqrt(1 + m[2][2] - m[0][0] - m[1][1]) * 2;
    w = (m[1][0] - m[0][1]) / s;
    x = (m[0][2] + m[2][0]) / s;
    y = (m[1][2] + m[2][1]) / s;
    z = s / 4;
  }
  const n = Math.hypot(w, x, y, z);
  const sgn = w < 0 ? -1 : 1;
  return [(sgn * w) / n, (sgn * x) / n, (sgn * y) / n, (sgn * z) / n];
}

export function quatToMat(q: Quat): Mat3 {
  const [w, x, y, z] = q;
  return [
    [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
    [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
    [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
  ];
}

export interface DhTable {
  a: number[];
  d: number[];
  alpha: number[];
  theta_offset: number[];
}

export interface Frame {
  p: Vec3;
  R: Mat3;
}

/** Standard-DH forward kinematics: world frame of every link plus the base. */
export function fkFrames(dh: DhTable, q: number[]): Frame[] {
  let p: Vec3 = [0, 0, 0];
  let R = matIdentity();
  const frames: Frame[] = [{ p, R }];
  for (let i = 0; i < q.length; i++) {
    const th = q[i] + dh.theta_offset[i];
    const ct = Math.cos(th);
    const st = Math.sin(th);
    const ca = Math.cos(dh.alpha[i]);
    const sa = Math.sin(dh.alpha[i]);
    const Ri: Mat3 = [
      [ct, -st * ca, st * sa],
      [st, ct * ca, -ct * sa],
      [0, sa, ca],
    ];
    const ti: Vec3 = [dh.a[i] * ct, dh.a[i] * st, dh.d[i]];
    p = add(p, matVec(R, ti));
    R = matMul(R, Ri);
    frames.push({ p, R });
  }
  return frames;
}

/** Radial projection onto the reach sphere (mirrors the server's clamp). */
export function clipToReach(p: Vec3, reach: number): Vec3 {
  const r = norm(p);
  if (r <= reach || r === 0) return p;
  return scale(p, reach / r);
}
