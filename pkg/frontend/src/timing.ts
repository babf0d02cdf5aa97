/**
 * Monotonic client clock in integer microseconds.
 *
 * Reaction times are (response - stimulusDisplayed) on this clock only;
 * wall time and server time never enter the computation.
 */
export function monotonicNowUs(): number {
  return Math.round(performance.now() * 1000);
}
