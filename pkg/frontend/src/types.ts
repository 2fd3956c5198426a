// Wire types for the review service API (plumekit.review_api.v1).
// Shapes mirror the JSON the service emits; optional fields appear only
// after the corresponding review action has happened.

export type Ring = [number, number][];

export type ReviewState = 'proposed' | 'validated' | 'rejected';

export type ReviewAction = 'validate' | 'validate_with_redraw' | 'reject';

export interface Candidate {
  id: string;
  granule_id: string;
  score: number;
  area_px: number;
  review_state: ReviewState;
  pixels: [number, number][];
  polygon: Ring[];
  flux_kg_per_hr?: number | null;
  replacement_polygon?: Ring[] | null;
  reviewed_utc?: string | null;
  reviewed_by?: string | null;
}

export interface Granule {
  granule_id: string;
  sensor_id: string;
  acquired_utc: string;
  center_lat: number;
  center_lon: number;
  has_plume: boolean;
  candidate_counts: { proposed: number; validated: number; rejected: number };
}

export interface QueuePage {
  total: number;
  page: number;
  page_size: number;
  items: Candidate[];
}

export interface QueueFilters {
  sensor?: string;
  date_from?: string;
  date_to?: string;
  bbox?: [number, number, number, number];
  min_score?: number;
  page?: number;
  page_size?: number;
}

export interface MonitoringSite {
  site_id: string;
  square: [number, number, number, number];
  created_from: string;
}

export interface NotificationItem {
  candidate_id: string;
  granule_id: string;
  sensor_id: string;
  acquired_utc: string;
  validated_utc: string | null;
  validated_by: string | null;
  flux_kg_per_hr: number | null;
  score: number;
  location: { lon: number; lat: number };
  polygon: Ring[];
}

export type OverlayName =
  | 'rgb'
  | 'enhancement'
  | 'probability'
  | 'candidates'
  | 'sites';

export type OverlayToggles = Record<OverlayName, boolean>;
