/** Angle-to-pixel projection, the inverse of the server's pixel mapping. */

export interface Pose {
  yaw: number;
  pitch: number;
  hfov: number;
}

export interface PhotoPoint {
  x: number;
  y: number;
  /** false when the direction projects outside the frame */
  visible: boolean;
}

const DEG = Math.PI / 180;

/** Wrap an angle difference into [-180, 180). */
export function wrapDelta(deg: number): number {
  return ((deg + 180) % 360 + 360) % 360 - 180;
}

/**
 * Photo pixel for a (azimuth, elevation) direction under the pose. Columns
 * follow x = w/2 * (1 + tan(az - yaw) / tan(hfov/2)) and rows the analogous
 * vertical tangent with vfov = hfov * h / w, matching the server's mapping.
 */
export function projectToPhoto(
  pose: Pose,
  width: number,
  height: number,
  azimuthDeg: number,
  elevationDeg: number,
): PhotoPoint {
  const dAz = wrapDelta(azimuthDeg - pose.yaw);
  const dEl = elevationDeg - pose.pitch;
  if (Math.abs(dAz) >= 90) return { x: NaN, y: NaN, visible: false };
  const halfW = width / 2;
  const halfH = height / 2;
  const vfov = (pose.hfov * height) / width;
  const x = halfW + (halfW * Math.tan(dAz * DEG)) / Math.tan((pose.hfov / 2) * DEG);
  const y = halfH - (halfH * Math.tan(dEl * DEG)) / Math.tan((vfov / 2) * DEG);
  const visible = x >= 0 && x < width && y >= 0 && y < height;
  return { x, y, visible };
}

/** Azimuth/elevation of a photo pixel under the pose (forward mapping). */
export function pixelToAngles(
  pose: Pose,
  width: number,
  height: number,
  x: number,
  y: number,
): { azimuth: number; elevation: number } {
  const vfov = (pose.hfov * height) / width;
  const nx = (x - width / 2) / (width / 2);
  const ny = (y - height / 2) / (height / 2);
  const azimuth =
    ((pose.yaw + Math.atan(nx * Math.tan((pose.hfov / 2) * DEG)) / DEG) % 360 + 360) % 360;
  const elevation = pose.pitch - Math.atan(ny * Math.tan((vfov / 2) * DEG)) / DEG;
  return { azimuth, elevation };
}
