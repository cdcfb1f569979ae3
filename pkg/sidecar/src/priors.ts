/**
 * Score functions served by the sidecar. Arithmetic runs in float64 on the
 * float32 wire values, matching the client-side analytic priors bit-for-bit
 * up to the 32-bit response truncation.
 */

export interface Schedule {
  steps: number;
  alphaBars: Float64Array;
}

/** Linear beta ramp; alphaBars[t-1] is the running product at timestep t. */
export function linearSchedule(steps: number, betaStart: number, betaEnd: number): Schedule {
  if (steps < 1 || !(betaStart > 0) || !(betaEnd < 1) || !(betaStart < betaEnd || steps === 1)) {
    throw new Error(`invalid schedule parameters (${steps}, ${betaStart}, ${betaEnd})`);
  }
  const alphaBars = new Float64Array(steps);
  let product = 1.0;
  for (let i = 0; i < steps; i++) {
    const beta =
      steps === 1 ? betaStart : betaStart + (i * (betaEnd - betaStart)) / (steps - 1);
    product *= 1.0 - beta;
    alphaBars[i] = product;
  }
  return { steps, alphaBars };
}

export interface ScoreFn {
  (image: Float64Array, t: number, height: number, width: number, channels: number): Float64Array;
}

export function identityScore(): ScoreFn {
  return (image) => new Float64Array(image.length);
}

/**
 * Separable 3-tap blur with per-axis kernel [s/4, 1 - s/2, s/4], rows then
 * columns, edge replication; score = (blur(x) - x) / (1 - alphaBar_t).
 */
export function gaussianShrinkScore(strength: number, schedule: Schedule): ScoreFn {
  if (!(strength > 0)) {
    throw new Error(`strength must be > 0, got ${strength}`);
  }
  const k0 = strength / 4.0;
  const k1 = 1.0 - strength / 2.0;
  return (image, t, height, width, channels) => {
    if (t < 1 || t > schedule.steps) {
      throw new Error(`timestep ${t} out of range 1..${schedule.steps}`);
    }
    const oneMinusAb = 1.0 - schedule.alphaBars[t - 1];
    const out = new Float64Array(image.length);
    const rows = new Float64Array(height * width);
    for (let c = 0; c < channels; c++) {
      const base = c * height * width;
      for (let i = 0; i < height; i++) {
        const up = Math.max(i - 1, 0) * width;
        const mid = i * width;
        const down = Math.min(i + 1, height - 1) * width;
        for (let j = 0; j < width; j++) {
          rows[mid + j] =
            k0 * image[base + up + j] + k1 * image[base + mid + j] + k0 * image[base + down + j];
        }
      }
      for (let i = 0; i < height; i++) {
        const mid = i * width;
        for (let j = 0; j < width; j++) {
          const left = Math.max(j - 1, 0);
          const right = Math.min(j + 1, width - 1);
          const blurred = k0 * rows[mid + left] + k1 * rows[mid + j] + k0 * rows[mid + right];
          out[base + mid + j] = (blurred - image[base + mid + j]) / oneMinusAb;
        }
      }
    }
    return out;
  };
}
