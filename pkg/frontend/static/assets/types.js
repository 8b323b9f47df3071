// JSON shapes served by the review API.
export const FAILURE_MODES = [
    'wrong_hand',
    'occluded_hand',
    'noisy_contact_frame',
    'homography_drift',
    'other',
];
